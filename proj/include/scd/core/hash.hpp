// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <Eigen/Core>

namespace scd {

/// Incremental SHA-256, hex digest.
class Sha256 {
public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::byte> bytes);
  Sha256& update(const std::string& text);

  template <typename Derived>
  Sha256& update(const Eigen::DenseBase<Derived>& values) {
    typename Derived::PlainObject plain = values;
    return update(std::as_bytes(std::span(plain.data(), static_cast<std::size_t>(plain.size()))));
  }

  Sha256& update_file(const std::filesystem::path& path);

  std::string hex();

private:
  void* ctx_;
};

/// splitmix64 mix of (base, index); used to derive per-item seeds so that
/// item i is reproducible regardless of processing order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

} // namespace scd
