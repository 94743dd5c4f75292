#pragma once

namespace covevo {

/// Keeps freed Gram-matrix-sized blocks in the heap instead of returning them
/// to the OS after every evaluation. Call once at program start; it is a
/// no-op where the allocator cannot be tuned.
void configure_allocator();

}  // namespace covevo
