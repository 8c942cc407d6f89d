#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fluxinv::fixtures {

struct FuzzReport {
  int cases = 0;
  int accepted = 0;
  int rejected = 0;                  // raised fluxinv::Error
  std::vector<std::string> escapes;  // any other exception, with the input
};

// Mutates valid documents of every schema and feeds them to the loaders.
FuzzReport fuzz_loaders(int cases, std::uint64_t seed);

// Writes randomized content for every schema, reads it back and compares
// bit for bit. Returns the names of schemas that failed.
std::vector<std::string> round_trip_all_schemas(std::uint64_t seed, int repeats);

}  // namespace fluxinv::fixtures
