// Copyright 2026 The Stickergen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <random>
#include <utility>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stickergen {

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced to an operator belongs to one class; the CLI
// maps classes to distinct exit codes.
// ---------------------------------------------------------------------------

enum class ErrorClass : int {
  kConfig = 2,
  kParse = 3,
  kValidation = 4,
  kDependency = 5,
  kTraining = 6,
  kTransport = 7,
  kIo = 8,
  kEvaluation = 9,
  kContract = 10,
};

inline const char* error_class_name(ErrorClass c) {
  switch (c) {
    case ErrorClass::kConfig: return "config";
    case ErrorClass::kParse: return "parse";
    case ErrorClass::kValidation: return "validation";
    case ErrorClass::kDependency: return "dependency";
    case ErrorClass::kTraining: return "training";
    case ErrorClass::kTransport: return "transport";
    case ErrorClass::kIo: return "io";
    case ErrorClass::kEvaluation: return "evaluation";
    case ErrorClass::kContract: return "contract";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(std::string(error_class_name(cls)) + " error: " + what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

#define STICKERGEN_ERROR_TYPE(Name, Cls)                                        \
  class Name : public Error {                                                   \
   public:                                                                      \
    explicit Name(const std::string& what) : Error(ErrorClass::Cls, what) {}    \
  }

STICKERGEN_ERROR_TYPE(ConfigError, kConfig);
STICKERGEN_ERROR_TYPE(ValidationError, kValidation);
STICKERGEN_ERROR_TYPE(DependencyError, kDependency);
STICKERGEN_ERROR_TYPE(TrainingError, kTraining);
STICKERGEN_ERROR_TYPE(TransportError, kTransport);
STICKERGEN_ERROR_TYPE(IoError, kIo);
STICKERGEN_ERROR_TYPE(EvaluationError, kEvaluation);
STICKERGEN_ERROR_TYPE(ContractError, kContract);

#undef STICKERGEN_ERROR_TYPE

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(ErrorClass::kParse, line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// ---------------------------------------------------------------------------
// Properties and user groups.
// ---------------------------------------------------------------------------

/// The five annotated sticker properties. The enumerator order is the
/// canonical storage order used by every per-property array.
enum class Property : std::uint8_t { kOcr = 0, kIp = 1, kEntity = 2, kStyle = 3, kMeaning = 4 };

inline constexpr std::size_t kNumProperties = 5;
inline constexpr std::array<Property, kNumProperties> kAllProperties = {
    Property::kOcr, Property::kIp, Property::kEntity, Property::kStyle, Property::kMeaning};

inline constexpr std::size_t index_of(Property p) { return static_cast<std::size_t>(p); }

/// Single-letter symbol: o, c, e, v, m.
inline constexpr char property_symbol(Property p) {
  constexpr char kSymbols[] = {'o', 'c', 'e', 'v', 'm'};
  return kSymbols[index_of(p)];
}

inline constexpr std::string_view property_name(Property p) {
  constexpr std::string_view kNames[] = {"ocr", "ip", "entity", "style", "meaning"};
  return kNames[index_of(p)];
}

inline std::optional<Property> property_from_symbol(char s) {
  for (Property p : kAllProperties)
    if (property_symbol(p) == s) return p;
  return std::nullopt;
}

enum class AgeBucket : std::uint8_t { k0To19 = 0, k20To29 = 1, k30To44 = 2, k45To59 = 3 };
enum class Gender : std::uint8_t { kMale = 0, kFemale = 1 };

inline constexpr std::size_t kNumGroups = 8;

struct UserGroup {
  AgeBucket age = AgeBucket::k0To19;
  Gender gender = Gender::kMale;

  /// Dense index in [0, 8): age-major.
  constexpr std::size_t index() const {
    return static_cast<std::size_t>(age) * 2 + static_cast<std::size_t>(gender);
  }
  static constexpr UserGroup from_index(std::size_t i) {
    return UserGroup{static_cast<AgeBucket>(i / 2), static_cast<Gender>(i % 2)};
  }
  friend constexpr bool operator==(UserGroup, UserGroup) = default;

  /// Token form used in files, e.g. "20-29/female".
  std::string name() const {
    constexpr const char* kAges[] = {"0-19", "20-29", "30-44", "45-59"};
    return std::string(kAges[static_cast<int>(age)]) + "/" +
           (gender == Gender::kMale ? "male" : "female");
  }
  static UserGroup parse(std::string_view s) {
    for (std::size_t i = 0; i < kNumGroups; ++i) {
      UserGroup g = from_index(i);
      if (g.name() == s) return g;
    }
    throw ParseError("unknown user group '" + std::string(s) + "'");
  }
};

// ---------------------------------------------------------------------------
// Tokenization: lowercase, punctuation stripped, whitespace split. Shared by
// the embedder, the vocabulary and the intent table keys.
// ---------------------------------------------------------------------------

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else if (std::ispunct(ch)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& t : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hashing and seed derivation.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t fnv1a64(std::string_view s,
                                       std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named fan-out of a root seed: derive_seed(root, "userrep") etc.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  return splitmix64(root ^ fnv1a64(name));
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

// ---------------------------------------------------------------------------
// Little-endian binary IO used by codebook, index and checkpoint files.
// ---------------------------------------------------------------------------

namespace binio {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}
inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}
inline void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
inline void put_str(std::ostream& os, std::string_view s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void put_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void need(std::istream& is, const char* what) {
  if (!is) throw ParseError(std::string("truncated binary file while reading ") + what);
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  need(is, "u64");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  need(is, "u32");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
inline std::uint8_t get_u8(std::istream& is) {
  int c = is.get();
  need(is, "u8");
  return static_cast<std::uint8_t>(c);
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }
inline std::string get_str(std::istream& is) {
  std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  need(is, "string");
  return s;
}
inline void expect_magic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(magic.size()));
  if (!is || got != magic)
    throw ParseError("bad file magic, expected '" + std::string(magic) + "'");
}

}  // namespace binio

// ---------------------------------------------------------------------------
// Portable seeded randomness. Engine output of mt19937_64 is fixed by the
// standard; the distributions below avoid the implementation-defined std ones
// so generated artifacts are identical across standard libraries.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform integer in [0, n).
  std::size_t uniform(std::size_t n) {
    if (n == 0) throw ContractError("Rng::uniform with n == 0");
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(eng_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return unit() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = unit();
    double u2 = unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  /// Index drawn from an unnormalized non-negative weight vector.
  std::size_t categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double r = unit() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
      r -= w[i];
      if (r < 0.0) return i;
    }
    return w.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform(i)]);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Intent ranking: a permutation of the five properties, most intended first.
// ---------------------------------------------------------------------------

class IntentRanking {
 public:
  IntentRanking() : order_(kAllProperties) {}

  /// Throws ParseError unless `order` lists every property exactly once.
  explicit IntentRanking(const std::vector<Property>& order) {
    if (order.size() != kNumProperties)
      throw ParseError("intent ranking must list 5 properties, got " +
                       std::to_string(order.size()));
    std::array<bool, kNumProperties> seen{};
    for (std::size_t i = 0; i < kNumProperties; ++i) {
      if (seen[index_of(order[i])])
        throw ParseError("intent ranking repeats property '" +
                         std::string(property_name(order[i])) + "'");
      seen[index_of(order[i])] = true;
      order_[i] = order[i];
    }
  }

  /// Parses the 5-symbol form, e.g. "cvemo".
  static IntentRanking parse(std::string_view symbols) {
    std::vector<Property> order;
    for (char s : symbols) {
      auto p = property_from_symbol(s);
      if (!p) throw ParseError("unknown intent symbol '" + std::string(1, s) + "'");
      order.push_back(*p);
    }
    return IntentRanking(order);
  }

  std::string symbols() const {
    std::string s;
    for (Property p : order_) s.push_back(property_symbol(p));
    return s;
  }

  const std::array<Property, kNumProperties>& order() const { return order_; }
  Property at(std::size_t i) const { return order_.at(i); }

  /// 1-based rank of p.
  std::size_t rank(Property p) const {
    for (std::size_t i = 0; i < kNumProperties; ++i)
      if (order_[i] == p) return i + 1;
    return kNumProperties;  // unreachable for a valid permutation
  }

  friend bool operator==(const IntentRanking&, const IntentRanking&) = default;

 private:
  std::array<Property, kNumProperties> order_;
};

/// Logarithmic decay weight 1 / log2(rank + 1) for a 1-based rank.
inline double decay_weight(std::size_t rank) {
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

}  // namespace stickergen
