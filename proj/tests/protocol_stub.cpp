// Misbehaving and fixed-output protocol peers for the adapter tests.
//   protocol_stub echo <dir>      answers every request with <dir>/{main,aux,act}.tnsr
//   protocol_stub truncate        dies halfway through the first response
//   protocol_stub wrong-classes   declares C=7 but returns 3-class logits
//   protocol_stub error           answers with an error frame
//   protocol_stub bad-magic       sends a corrupt handshake

#include <cstring>
#include <string>
#include <unistd.h>

#include "sprayeval/protocol.hpp"
#include "sprayeval/tensor_io.hpp"

using namespace sprayeval;

int main(int argc, char** argv) {
    if (argc < 2) return 2;
    const std::string mode = argv[1];
    FdSource in(STDIN_FILENO);
    FdSink out(STDOUT_FILENO);

    if (mode == "bad-magic") {
        const std::string junk = "SPRYv0\n\0\0\0\0\0\0\0\0";
        out.write_all({reinterpret_cast<const std::uint8_t*>(junk.data()), junk.size()});
        return 0;
    }
    if (mode == "echo") {
        const std::string dir = argc > 2 ? argv[2] : ".";
        ModelOutput fixed{read_tensor(dir + "/main.tnsr"), read_tensor(dir + "/aux.tnsr"), read_tensor(dir + "/act.tnsr")};
        out.write_all(encode_handshake(static_cast<std::uint32_t>(fixed.main.channels()),
                                       static_cast<std::uint32_t>(fixed.activations.channels())));
        try {
            for (;;) {
                const Request r = read_request(in);
                if (r.opcode == Opcode::shutdown) return 0;
                out.write_all(encode_response(fixed));
            }
        } catch (const EngineLostError&) {
            return 0;
        }
    }

    out.write_all(encode_handshake(7, 8));
    const Request r = read_request(in);
    ModelOutput o;
    o.main = Tensor(7, r.image.height(), r.image.width());
    o.aux = Tensor(7, 4, 4);
    o.activations = Tensor(8, 4, 4);
    if (mode == "truncate") {
        const auto frame = encode_response(o);
        out.write_all({frame.data(), frame.size() / 2});
        ::_exit(1);
    }
    if (mode == "wrong-classes") {
        o.main = Tensor(3, r.image.height(), r.image.width());
        o.aux = Tensor(3, 4, 4);
        out.write_all(encode_response(o));
    } else if (mode == "error") {
        out.write_all(encode_error_response("checkpoint exploded"));
    }
    try {
        for (;;) read_request(in);
    } catch (const Error&) {
    }
    return 0;
}
