#include <gelflow/gelflow.hpp>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gelflow::run_cli(args);
}
