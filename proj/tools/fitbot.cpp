#include "fitbot/cli/app.hpp"

int main(int argc, char** argv) { return fitbot::cli::run_cli(argc, argv); }
