#pragma once

namespace hpinn {

/// Keeps large temporary buffers on the heap instead of fresh mmap pages.
/// Training allocates and frees the same multi-megabyte derivative tapes every
/// epoch; with glibc defaults each one is page-faulted in again. Call once from
/// main(). No-op where mallopt is unavailable.
void tune_allocator();

}  // namespace hpinn
