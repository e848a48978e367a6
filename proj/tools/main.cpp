#include "o2b/commands.hpp"

int main(int argc, char** argv) {
  return o2b::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
