// Writes the brute-force Fock-space tables used as test fixtures.
//
//   make_fock_tables DIR        -> DIR/fock_N4.txt, fock_N5.txt, fock_N6.txt

#include <filesystem>
#include <fstream>
#include <iostream>

#include "latticecorr/oracle/fock_space.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fock_tables DIR\n";
    return 2;
  }
  const std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);
  for (std::size_t n : {4u, 5u, 6u}) {
    const auto path = dir / ("fock_N" + std::to_string(n) + ".txt");
    std::ofstream os(path);
    if (!os) {
      std::cerr << "cannot write " << path << '\n';
      return 1;
    }
    latticecorr::oracle::write_fock_table(os, latticecorr::oracle::build_fock_table(n));
    std::cout << path.string() << '\n';
  }
  return 0;
}
