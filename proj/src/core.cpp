#include "auxdesign/core.hpp"

#include <atomic>

namespace auxdesign {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::atomic<int> g_threads{1};

}  // namespace

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::uint64_t index) {
  // FNV-1a over the label, mixed with parent and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(parent ^ h) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

void set_thread_count(int threads) { g_threads.store(threads < 1 ? 1 : threads); }

int thread_count() { return g_threads.load(); }

}  // namespace auxdesign
