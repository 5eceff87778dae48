/*
 * Copyright 2026 The crprobe Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

namespace crprobe {

/// Dense item index into a vocabulary.
using ItemIndex = std::uint32_t;

// Error categories. The CLI maps each one onto a distinct exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitModel = 4;

namespace binio {

// Little-endian fixed-width encoding, independent of host byte order.
template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(buf.data(), buf.size());
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw DataError("binary cache truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(buf[i]) << (8 * i);
  }
  return static_cast<T>(bits);
}

inline void put_f64(std::ostream& out, double value) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(value));
  std::memcpy(&bits, &value, sizeof(bits));
  put<std::uint64_t>(out, bits);
}

inline double get_f64(std::istream& in) {
  auto bits = get<std::uint64_t>(in);
  double value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

inline void put_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) {
    throw DataError("bad cache header: expected magic '" + std::string(magic) +
                    "'");
  }
}

}  // namespace binio

/// 64-bit FNV-1a, used for content hashing of caches.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s(16, '0');
    auto v = state_;
    for (int i = 15; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
      v >>= 4;
    }
    return s;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Effective worker count: the request (0 = hardware concurrency), capped by
/// the CRPROBE_WORKERS environment variable when set.
inline unsigned resolve_workers(unsigned requested) {
  unsigned workers = requested;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CRPROBE_WORKERS"); env && *env) {
    char* end = nullptr;
    long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) {
      workers = std::min(workers, static_cast<unsigned>(cap));
    }
  }
  return std::max(1u, workers);
}

/// Splits [0, n) into contiguous chunks, one per worker, and runs
/// fn(begin, end, worker_id) on each. The chunking is a function of n and
/// the worker count only; callers keep per-worker accumulators and combine
/// them with commutative integer sums so the result is schedule-independent.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || n < 2) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t begin = n * w / workers;
    std::size_t end = n * (w + 1) / workers;
    threads.emplace_back([&, begin, end, w] {
      try {
        fn(begin, end, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace crprobe
