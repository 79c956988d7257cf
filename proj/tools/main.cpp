#include "koopagru/cli.hpp"

int main(int argc, char** argv) {
    return koopagru::cli::run(argc, argv);
}
