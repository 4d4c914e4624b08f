// Regenerates the checked-in LeNet fixture: gen_fixture <out.json> [seed]

#include <iostream>

#include "slicewise/digest.hpp"
#include "slicewise/model_io.hpp"
#include "slicewise/random.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: gen_fixture <out.json> [seed]\n";
    return 2;
  }
  std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 0;
  slicewise::write_file(argv[1], slicewise::serialize_model(slicewise::random_lenet(seed)));
  return 0;
}
