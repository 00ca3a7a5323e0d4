#include <string>
#include <vector>

#include "unitbox/cli.hpp"

int main(int argc, char** argv) { return unitbox::run_cli(std::vector<std::string>(argv, argv + argc)); }
