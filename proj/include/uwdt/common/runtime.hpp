#pragma once

#include <malloc.h>

namespace uwdt {

// Keeps large activation buffers on the heap between training steps instead
// of returning them to the OS, which otherwise page-faults on every step.
inline void configure_allocator() {
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 * 1024 * 1024);
}

}  // namespace uwdt
