#include <cstdlib>
#include <cstring>

#include "recenv/simd/vecmath.hpp"

namespace recenv::simd {
namespace {

const Ops& resolve() {
  const Ops* avx2 = avx2_ops();
  if (const char* force = std::getenv("RECENV_SIMD")) {
    if (std::strcmp(force, "scalar") == 0) return scalar_ops();
    if (std::strcmp(force, "avx2") == 0 && avx2) return *avx2;
    // Unknown or unsupported request: fall through to autodetect.
  }
  return avx2 ? *avx2 : scalar_ops();
}

}  // namespace

const Ops& ops() {
  static const Ops& table = resolve();
  return table;
}

const char* active_isa() { return ops().name; }

}  // namespace recenv::simd
