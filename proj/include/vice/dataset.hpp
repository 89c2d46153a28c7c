#pragma once

// Triplet odd-one-out judgments: data model, text format, splitting and
// aggregation of repeated responses.
//
// File format: one record per line, `y z odd`, where {y, z} is the pair the
// subject judged most similar and `odd` is the odd-one-out. Indices are
// 0-based (objects numbered 1..m elsewhere are shifted down by one). Fields
// are separated by runs of spaces/tabs or by a single comma. Lines whose
// first non-blank character is `#` are comments.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vice/error.hpp"
#include "vice/format.hpp"

namespace vice {

using ObjectIndex = std::uint32_t;

/// Position of a pair within the canonical ordering [{a,b}, {a,c}, {b,c}]
/// of a triplet a < b < c.
enum class PairSlot : std::uint8_t { kAB = 0, kAC = 1, kBC = 2 };

inline constexpr std::size_t slot_index(PairSlot s) noexcept {
  return static_cast<std::size_t>(s);
}

/// A triplet in ascending index order.
struct Triplet {
  std::array<ObjectIndex, 3> objects{};

  /// Builds a triplet from three distinct indices in any order.
  static Triplet of(ObjectIndex x, ObjectIndex y, ObjectIndex z) {
    Triplet t{{x, y, z}};
    std::sort(t.objects.begin(), t.objects.end());
    return t;
  }

  ObjectIndex operator[](std::size_t i) const noexcept { return objects[i]; }

  /// The two members of the pair at `slot`.
  std::array<ObjectIndex, 2> pair(PairSlot slot) const noexcept {
    switch (slot) {
      case PairSlot::kAB: return {objects[0], objects[1]};
      case PairSlot::kAC: return {objects[0], objects[2]};
      case PairSlot::kBC: return {objects[1], objects[2]};
    }
    return {objects[0], objects[1]};
  }

  /// Slot of the pair that leaves `odd` out.
  PairSlot slot_without(ObjectIndex odd) const noexcept {
    if (odd == objects[2]) return PairSlot::kAB;
    if (odd == objects[1]) return PairSlot::kAC;
    return PairSlot::kBC;
  }

  /// Member left out by the pair at `slot`.
  ObjectIndex odd_for(PairSlot slot) const noexcept {
    return objects[2 - slot_index(slot)];
  }

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// One judgment: the pair {first, second} was chosen, `odd` was left out.
/// The as-read order is kept so files round-trip.
struct TripletRecord {
  ObjectIndex first = 0;
  ObjectIndex second = 1;
  ObjectIndex odd = 2;

  Triplet triplet() const { return Triplet::of(first, second, odd); }
  PairSlot chosen() const { return triplet().slot_without(odd); }

  static TripletRecord from_slot(const Triplet& t, PairSlot chosen) {
    const auto p = t.pair(chosen);
    return {p[0], p[1], t.odd_for(chosen)};
  }

  /// Equality as an unordered triplet with an unordered chosen pair.
  bool same_judgment(const TripletRecord& o) const {
    return odd == o.odd && triplet() == o.triplet();
  }

  friend bool operator==(const TripletRecord&, const TripletRecord&) = default;
};

/// An immutable collection of judgments over objects [0, num_objects).
class TripletDataset {
 public:
  TripletDataset() = default;

  TripletDataset(std::vector<TripletRecord> records, std::size_t num_objects)
      : records_(std::move(records)), num_objects_(num_objects) {
    if (num_objects_ < 3) throw DataError("dataset needs at least 3 objects");
    for (std::size_t s = 0; s < records_.size(); ++s) {
      const auto& r = records_[s];
      if (r.first == r.second || r.first == r.odd || r.second == r.odd)
        throw DataError("record " + std::to_string(s) + ": duplicate index");
      if (r.first >= num_objects_ || r.second >= num_objects_ || r.odd >= num_objects_)
        throw DataError("record " + std::to_string(s) + ": index out of range");
    }
  }

  const std::vector<TripletRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t num_objects() const noexcept { return num_objects_; }
  const TripletRecord& operator[](std::size_t i) const { return records_[i]; }

 private:
  std::vector<TripletRecord> records_;
  std::size_t num_objects_ = 0;
};

/// Empirical distribution of choices over a triplet, in canonical pair order.
struct ResponseDistribution {
  Triplet triplet;
  std::array<std::uint64_t, 3> counts{};
  std::array<double, 3> probabilities{};

  std::uint64_t total() const noexcept { return counts[0] + counts[1] + counts[2]; }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  if (line.find(',') != std::string_view::npos) {
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      auto field = line.substr(start, pos == std::string_view::npos ? line.npos : pos - start);
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      out.push_back(b == std::string_view::npos ? std::string_view{} : field.substr(b, e - b + 1));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline ObjectIndex parse_index(std::string_view field, std::size_t line_no) {
  if (field.empty()) throw ParseError(line_no, "empty field");
  std::uint64_t v = 0;
  for (char c : field) {
    if (c < '0' || c > '9')
      throw ParseError(line_no, "field '" + std::string(field) + "' is not a non-negative integer");
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
    if (v > 0xFFFFFFFFull) throw ParseError(line_no, "index too large");
  }
  return static_cast<ObjectIndex>(v);
}

}  // namespace detail

/// Parses triplet judgments from a stream. Errors carry the 1-based line number.
inline TripletDataset parse_dataset(std::istream& in, std::size_t num_objects) {
  if (num_objects < 3) throw DataError("num_objects must be at least 3");
  std::vector<TripletRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 3)
      throw ParseError(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    TripletRecord r{detail::parse_index(fields[0], line_no), detail::parse_index(fields[1], line_no),
                    detail::parse_index(fields[2], line_no)};
    if (r.first == r.second || r.first == r.odd || r.second == r.odd)
      throw ParseError(line_no, "malformed record: duplicate index within triplet");
    for (ObjectIndex v : {r.first, r.second, r.odd}) {
      if (v >= num_objects)
        throw ParseError(line_no, "index " + std::to_string(v) + " out of range for " +
                                      std::to_string(num_objects) + " objects");
    }
    records.push_back(r);
  }
  return TripletDataset(std::move(records), num_objects);
}

inline TripletDataset parse_dataset(const std::string& path, std::size_t num_objects) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open triplet file '" + path + "'");
  return parse_dataset(in, num_objects);
}

inline void write_dataset(std::ostream& out, const TripletDataset& data) {
  for (const auto& r : data.records()) out << r.first << ' ' << r.second << ' ' << r.odd << '\n';
}

inline void write_dataset(const std::string& path, const TripletDataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_dataset(out, data);
}

struct SplitFractions {
  double train = 0.9;
  double val = 0.1;
  double test = 0.0;
};

struct DatasetSplit {
  TripletDataset train;
  TripletDataset val;
  TripletDataset test;
};

/// Shuffles under `seed` and partitions. Validation and test sizes are
/// floor(fraction * n); the remainder goes to train.
inline DatasetSplit split_dataset(const TripletDataset& data, SplitFractions f, std::uint64_t seed) {
  if (data.empty()) throw DataError("cannot split an empty dataset");
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto part = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = part(f.val);
  const std::size_t n_test = part(f.test);
  const std::size_t n_train = n - n_val - n_test;

  std::vector<TripletRecord> tr, va, te;
  tr.reserve(n_train);
  va.reserve(n_val);
  te.reserve(n_test);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = data[order[i]];
    if (i < n_train) tr.push_back(r);
    else if (i < n_train + n_val) va.push_back(r);
    else te.push_back(r);
  }
  const auto m = data.num_objects();
  return {TripletDataset(std::move(tr), m), TripletDataset(std::move(va), m),
          TripletDataset(std::move(te), m)};
}

/// One distribution per distinct triplet, ordered by triplet.
inline std::vector<ResponseDistribution> aggregate_repeats(const TripletDataset& data) {
  std::map<Triplet, std::array<std::uint64_t, 3>> tally;
  for (const auto& r : data.records()) {
    const auto t = r.triplet();
    ++tally[t][slot_index(t.slot_without(r.odd))];
  }
  std::vector<ResponseDistribution> out;
  out.reserve(tally.size());
  for (const auto& [t, counts] : tally) {
    ResponseDistribution d{t, counts, {}};
    const double total = static_cast<double>(d.total());
    for (std::size_t p = 0; p < 3; ++p) d.probabilities[p] = static_cast<double>(counts[p]) / total;
    out.push_back(d);
  }
  return out;
}

/// Mean over triplets of the largest response probability: the accuracy of
/// the Bayes-optimal predictor on these response distributions.
inline double accuracy_ceiling(const std::vector<ResponseDistribution>& dists) {
  if (dists.empty()) throw DataError("accuracy_ceiling: no distributions");
  double sum = 0.0;
  for (const auto& d : dists) {
    if (d.total() == 0) throw DataError("accuracy_ceiling: distribution with zero responses");
    sum += *std::max_element(d.probabilities.begin(), d.probabilities.end());
  }
  return sum / static_cast<double>(dists.size());
}

inline void write_distributions_csv(std::ostream& out, const std::vector<ResponseDistribution>& dists) {
  out << "i,j,k,p_ij,p_ik,p_jk\n";
  for (const auto& d : dists) {
    out << d.triplet[0] << ',' << d.triplet[1] << ',' << d.triplet[2] << ',' << format_double(d.probabilities[0])
        << ',' << format_double(d.probabilities[1]) << ',' << format_double(d.probabilities[2]) << '\n';
  }
}

}  // namespace vice
