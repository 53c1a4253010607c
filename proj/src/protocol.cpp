#include "sprayeval/protocol.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "sprayeval/tensor_io.hpp"

namespace sprayeval {
namespace {

constexpr std::uint32_t kMaxAblationIds = 1u << 20;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_blob(std::vector<std::uint8_t>& out, std::span<const std::uint8_t> blob) {
    if (blob.size() > kMaxBlobBytes) throw TransportError("blob exceeds protocol size limit");
    put_u32(out, static_cast<std::uint32_t>(blob.size()));
    out.insert(out.end(), blob.begin(), blob.end());
}

Tensor read_tensor_blob(ByteSource& in) {
    const std::uint32_t len = in.read_u32();
    const auto blob = in.read_blob(len);
    try {
        return decode_tensor(blob);
    } catch (const DataError& e) {
        throw TransportError(std::string("malformed tensor blob: ") + e.what());
    }
}

}  // namespace

std::uint8_t ByteSource::read_u8() {
    std::uint8_t b = 0;
    read_exact({&b, 1});
    return b;
}

std::uint32_t ByteSource::read_u32() {
    std::uint8_t b[4];
    read_exact(b);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::vector<std::uint8_t> ByteSource::read_blob(std::uint32_t len) {
    if (len > kMaxBlobBytes) throw TransportError("blob length " + std::to_string(len) + " exceeds protocol limit");
    constexpr std::size_t kChunk = 1 << 16;
    std::vector<std::uint8_t> out;
    while (out.size() < len) {
        const std::size_t n = std::min<std::size_t>(kChunk, len - out.size());
        const std::size_t at = out.size();
        out.resize(at + n);
        read_exact({out.data() + at, n});
    }
    return out;
}

void MemorySource::read_exact(std::span<std::uint8_t> out) {
    if (out.size() > remaining()) throw TransportError("unexpected end of frame");
    std::memcpy(out.data(), bytes_.data() + pos_, out.size());
    pos_ += out.size();
}

void FdSource::read_exact(std::span<std::uint8_t> out) {
    std::size_t got = 0;
    while (got < out.size()) {
        const ssize_t n = ::read(fd_, out.data() + got, out.size() - got);
        if (n > 0) {
            got += static_cast<std::size_t>(n);
        } else if (n == 0) {
            throw EngineLostError("engine closed its output stream");
        } else if (errno != EINTR) {
            throw EngineLostError(std::string("read from engine failed: ") + std::strerror(errno));
        }
    }
}

void FdSink::write_all(std::span<const std::uint8_t> bytes) {
    std::size_t put = 0;
    while (put < bytes.size()) {
        const ssize_t n = ::write(fd_, bytes.data() + put, bytes.size() - put);
        if (n >= 0) {
            put += static_cast<std::size_t>(n);
        } else if (errno != EINTR) {
            throw EngineLostError(std::string("write to engine failed: ") + std::strerror(errno));
        }
    }
}

std::vector<std::uint8_t> encode_handshake(std::uint32_t num_classes, std::uint32_t num_activations) {
    std::vector<std::uint8_t> out(kHandshakeMagic.begin(), kHandshakeMagic.end());
    put_u32(out, num_classes);
    put_u32(out, num_activations);
    return out;
}

std::pair<std::uint32_t, std::uint32_t> read_handshake(ByteSource& in) {
    std::vector<std::uint8_t> magic(kHandshakeMagic.size());
    in.read_exact(magic);
    if (!std::equal(magic.begin(), magic.end(), kHandshakeMagic.begin())) {
        throw TransportError("bad handshake magic");
    }
    const std::uint32_t c = in.read_u32();
    const std::uint32_t k = in.read_u32();
    if (c == 0 || k == 0) throw TransportError("handshake declares zero classes or activations");
    return {c, k};
}

std::vector<std::uint8_t> encode_request(const Request& request) {
    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(request.opcode));
    put_u32(out, static_cast<std::uint32_t>(request.ablation.channels().size()));
    for (std::uint32_t id : request.ablation.channels()) put_u32(out, id);
    if (request.opcode == Opcode::shutdown) {
        put_u32(out, 0);
    } else {
        put_blob(out, encode_tensor(request.image));
    }
    return out;
}

Request read_request(ByteSource& in) {
    Request req;
    const std::uint8_t op = in.read_u8();
    if (op != 1 && op != 2 && op != 255) throw TransportError("unknown opcode " + std::to_string(op));
    req.opcode = static_cast<Opcode>(op);
    const std::uint32_t n = in.read_u32();
    if (n > kMaxAblationIds) throw TransportError("ablation count exceeds protocol limit");
    if (req.opcode == Opcode::forward && n != 0) throw TransportError("forward request carries ablation ids");
    std::vector<std::uint32_t> ids;
    ids.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) ids.push_back(in.read_u32());
    try {
        req.ablation = AblationRequest(std::move(ids));
    } catch (const ContractError& e) {
        throw TransportError(e.what());
    }
    if (req.opcode == Opcode::shutdown) {
        const auto rest = in.read_blob(in.read_u32());
        (void)rest;
        return req;
    }
    req.image = read_tensor_blob(in);
    return req;
}

std::vector<std::uint8_t> encode_response(const ModelOutput& output) {
    std::vector<std::uint8_t> out;
    out.push_back(0);
    put_blob(out, encode_tensor(output.main));
    put_blob(out, encode_tensor(output.aux));
    put_blob(out, encode_tensor(output.activations));
    return out;
}

std::vector<std::uint8_t> encode_error_response(std::string_view message) {
    std::vector<std::uint8_t> out;
    out.push_back(1);
    put_blob(out, {reinterpret_cast<const std::uint8_t*>(message.data()), message.size()});
    return out;
}

Response read_response(ByteSource& in) {
    Response r;
    const std::uint8_t status = in.read_u8();
    if (status == 0) {
        r.ok = true;
        r.output.main = read_tensor_blob(in);
        r.output.aux = read_tensor_blob(in);
        r.output.activations = read_tensor_blob(in);
    } else if (status == 1) {
        const auto msg = in.read_blob(in.read_u32());
        r.message.assign(msg.begin(), msg.end());
    } else {
        throw TransportError("unknown response status " + std::to_string(status));
    }
    return r;
}

void serve_engine(InferenceEngine& engine, ByteSource& in, ByteSink& out) {
    const EngineDescriptor desc = engine.descriptor();
    out.write_all(encode_handshake(static_cast<std::uint32_t>(desc.num_classes),
                                   static_cast<std::uint32_t>(desc.num_activations)));
    for (;;) {
        Request req;
        try {
            req = read_request(in);
        } catch (const TransportError&) {
            return;  // parent went away or sent garbage
        }
        if (req.opcode == Opcode::shutdown) return;
        std::vector<std::uint8_t> frame;
        try {
            ModelOutput o = req.opcode == Opcode::forward ? engine.forward(req.image)
                                                          : engine.forward_ablated(req.image, req.ablation);
            frame = encode_response(o);
        } catch (const std::exception& e) {
            frame = encode_error_response(e.what());
        }
        out.write_all(frame);
    }
}

void check_output_contract(const ModelOutput& out, const EngineDescriptor& desc, const Tensor& image) {
    auto fail = [](const std::string& what) { throw ContractError("engine output violates contract: " + what); };
    if (out.main.rank() != 3 || out.aux.rank() != 3 || out.activations.rank() != 3) fail("tensors must be rank 3");
    if (out.main.channels() != desc.num_classes) fail("main logits have the wrong class count");
    if (out.aux.channels() != desc.num_classes) fail("aux logits have the wrong class count");
    if (out.activations.channels() != desc.num_activations) fail("activation channel count differs from handshake");
    if (out.main.height() != image.height() || out.main.width() != image.width()) {
        fail("main logits are not at input resolution");
    }
}

// ---------------------------------------------------------------------------

ExternalEngine::ExternalEngine(std::string command_line) : command_(std::move(command_line)) {
    std::signal(SIGPIPE, SIG_IGN);
    int down[2], up[2];
    if (::pipe2(down, O_CLOEXEC) != 0) throw IoError("pipe failed");
    if (::pipe2(up, O_CLOEXEC) != 0) {
        ::close(down[0]);
        ::close(down[1]);
        throw IoError("pipe failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw IoError("fork failed");
    if (pid_ == 0) {
        ::dup2(down[0], STDIN_FILENO);
        ::dup2(up[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(down[0]);
    ::close(up[1]);
    to_child_ = down[1];
    from_child_ = up[0];

    try {
        FdSource src(from_child_);
        auto [c, k] = read_handshake(src);
        descriptor_ = {static_cast<Index>(c), static_cast<Index>(k), "exec:" + command_};
    } catch (...) {
        lost_ = true;
        shutdown();
        throw;
    }
}

ExternalEngine::~ExternalEngine() { shutdown(); }

void ExternalEngine::shutdown() {
    if (pid_ <= 0) return;
    if (!lost_) {
        try {
            Request bye;
            bye.opcode = Opcode::shutdown;
            FdSink(to_child_).write_all(encode_request(bye));
        } catch (const Error&) {
        }
    }
    ::close(to_child_);
    ::close(from_child_);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
}

ModelOutput ExternalEngine::roundtrip(const Request& request) {
    if (lost_) throw EngineLostError("engine process is gone: " + command_);
    Response r;
    try {
        FdSink(to_child_).write_all(encode_request(request));
        FdSource src(from_child_);
        r = read_response(src);
    } catch (const TransportError&) {
        lost_ = true;  // stream position is unknown after a failed frame
        throw;
    }
    if (!r.ok) throw TransportError("engine reported an error: " + r.message);
    check_output_contract(r.output, descriptor_, request.image);
    return std::move(r.output);
}

ModelOutput ExternalEngine::forward(const Tensor& image) {
    Request req;
    req.opcode = Opcode::forward;
    req.image = image;
    return roundtrip(req);
}

ModelOutput ExternalEngine::forward_ablated(const Tensor& image, const AblationRequest& ablation) {
    ablation.check_range(descriptor_.num_activations);
    Request req;
    req.opcode = Opcode::forward_ablated;
    req.ablation = ablation;
    req.image = image;
    return roundtrip(req);
}

}  // namespace sprayeval
