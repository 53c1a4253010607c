#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

#include "sprayeval/engine.hpp"

namespace sprayeval {

// Framed stdio protocol between the pipeline and an external model process.
// Little-endian throughout.
//
//   handshake (child -> parent): "SPRYv1\n" u32 C u32 K
//   request:  u8 opcode | u32 n | n x u32 channel | u32 len | TNSR image
//   response: u8 status=0 | 3 x (u32 len | TNSR) main, aux, activations
//             u8 status=1 | u32 len | UTF-8 message

inline constexpr std::string_view kHandshakeMagic = "SPRYv1\n";

enum class Opcode : std::uint8_t { forward = 1, forward_ablated = 2, shutdown = 255 };

struct Request {
    Opcode opcode = Opcode::forward;
    AblationRequest ablation;
    Tensor image;
};

struct Response {
    bool ok = false;
    ModelOutput output;
    std::string message;
};

/// Blocking byte reader. Throws TransportError (or EngineLostError for
/// process pipes) when the stream ends early.
class ByteSource {
public:
    virtual ~ByteSource() = default;
    virtual void read_exact(std::span<std::uint8_t> out) = 0;

    std::uint8_t read_u8();
    std::uint32_t read_u32();
    /// Reads len bytes in bounded chunks so a bogus length cannot force a huge allocation up front.
    std::vector<std::uint8_t> read_blob(std::uint32_t len);
};

class ByteSink {
public:
    virtual ~ByteSink() = default;
    virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
};

class MemorySource final : public ByteSource {
public:
    explicit MemorySource(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    void read_exact(std::span<std::uint8_t> out) override;
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

class MemorySink final : public ByteSink {
public:
    void write_all(std::span<const std::uint8_t> bytes) override { bytes_.insert(bytes_.end(), bytes.begin(), bytes.end()); }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class FdSource final : public ByteSource {
public:
    explicit FdSource(int fd) : fd_(fd) {}
    void read_exact(std::span<std::uint8_t> out) override;

private:
    int fd_;
};

class FdSink final : public ByteSink {
public:
    explicit FdSink(int fd) : fd_(fd) {}
    void write_all(std::span<const std::uint8_t> bytes) override;

private:
    int fd_;
};

inline constexpr std::uint32_t kMaxBlobBytes = 1u << 30;

std::vector<std::uint8_t> encode_handshake(std::uint32_t num_classes, std::uint32_t num_activations);
/// Returns (C, K).
std::pair<std::uint32_t, std::uint32_t> read_handshake(ByteSource& in);

std::vector<std::uint8_t> encode_request(const Request& request);
Request read_request(ByteSource& in);

std::vector<std::uint8_t> encode_response(const ModelOutput& output);
std::vector<std::uint8_t> encode_error_response(std::string_view message);
Response read_response(ByteSource& in);

/// Server side of the protocol: emits the handshake, then answers requests
/// until shutdown or end of input. Engine failures become error frames.
void serve_engine(InferenceEngine& engine, ByteSource& in, ByteSink& out);

/// Engine backed by a child process speaking the framed protocol on its
/// stdin/stdout. The command line runs under /bin/sh -c.
class ExternalEngine final : public InferenceEngine {
public:
    explicit ExternalEngine(std::string command_line);
    ~ExternalEngine() override;
    ExternalEngine(const ExternalEngine&) = delete;
    ExternalEngine& operator=(const ExternalEngine&) = delete;

    ModelOutput forward(const Tensor& image) override;
    ModelOutput forward_ablated(const Tensor& image, const AblationRequest& ablation) override;
    EngineDescriptor descriptor() const override { return descriptor_; }

private:
    ModelOutput roundtrip(const Request& request);
    void shutdown();

    std::string command_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    bool lost_ = false;
    EngineDescriptor descriptor_;
};

/// Checks a decoded output against the engine descriptor and input image.
void check_output_contract(const ModelOutput& out, const EngineDescriptor& desc, const Tensor& image);

}  // namespace sprayeval
