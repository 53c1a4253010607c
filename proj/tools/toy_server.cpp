// Serves the built-in toy model over the framed stdio protocol, so the
// exec: engine path can be exercised without an external model runtime.

#include <iostream>
#include <unistd.h>

#include "CLI11.hpp"
#include "sprayeval/protocol.hpp"

int main(int argc, char** argv) {
    CLI::App app{"toy model protocol server"};
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "weight seed")->required();
    CLI11_PARSE(app, argc, argv);

    sprayeval::ToyFcn toy(seed);
    sprayeval::FdSource in(STDIN_FILENO);
    sprayeval::FdSink out(STDOUT_FILENO);
    try {
        sprayeval::serve_engine(toy, in, out);
    } catch (const sprayeval::Error& e) {
        std::cerr << "sprayeval-toy-server: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
