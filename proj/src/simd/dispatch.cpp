#include <atomic>
#include <cstdlib>
#include <string>

#include "slicewise/error.hpp"
#include "slicewise/simd.hpp"

namespace slicewise::simd {

namespace {

const KernelTable* find_variant(std::string_view name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") return avx2_kernels();
  if (name == "neon") return neon_kernels();
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("SLICEWISE_KERNELS")) {
    if (const KernelTable* t = find_variant(env)) return t;
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::vector<std::string_view> available_variants() {
  std::vector<std::string_view> names{"scalar"};
  if (avx2_kernels()) names.push_back("avx2");
  if (neon_kernels()) names.push_back("neon");
  return names;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select_variant(std::string_view name) {
  const KernelTable* t = find_variant(name);
  if (!t) throw ValidationError("kernel variant unavailable: " + std::string(name));
  current().store(t, std::memory_order_release);
}

}  // namespace slicewise::simd
