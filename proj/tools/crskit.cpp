#include "crskit/cli/app.hpp"

int main(int argc, char** argv) { return crskit::cli::run(argc, argv); }
