#include <iostream>
#include <string>
#include <vector>

#include "qclass/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qclass::run(args, std::cin, std::cout, std::cerr);
}
