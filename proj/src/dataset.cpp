#include "bkdt/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace bkdt {

namespace {

constexpr char kMagic[4] = {'B', 'K', 'N', 'N'};

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(const std::vector<unsigned char>& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

void check_finite(const PointMatrix& points, const std::string& where) {
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = 0; j < points.cols(); ++j) {
      if (!std::isfinite(points(i, j))) {
        throw std::invalid_argument(where + ": non-finite value at row " + std::to_string(i) +
                                    ", column " + std::to_string(j));
      }
    }
  }
}

// 24 random bits scaled into [0, 1): exactly representable, never 1.
float unit_float(std::mt19937_64& rng) {
  return static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f);
}

}  // namespace

DataFormat parse_format(const std::string& name) {
  if (name == "bin" || name == "binary") return DataFormat::Binary;
  if (name == "csv") return DataFormat::Csv;
  throw std::invalid_argument("unknown format '" + name + "' (expected bin or csv)");
}

DataFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".bin" || ext == ".bknn") ? DataFormat::Binary : DataFormat::Csv;
}

std::vector<unsigned char> encode_binary(const PointMatrix& points) {
  std::vector<unsigned char> out;
  out.reserve(kDatasetHeaderBytes + static_cast<std::size_t>(points.size()) * sizeof(float));
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, kDatasetVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(points.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(points.cols()));
  put<std::uint32_t>(out, 0);
  const auto* raw = reinterpret_cast<const unsigned char*>(points.data());
  out.insert(out.end(), raw, raw + static_cast<std::size_t>(points.size()) * sizeof(float));
  return out;
}

PointMatrix decode_binary(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kDatasetHeaderBytes) {
    throw ParseError("truncated header: expected " + std::to_string(kDatasetHeaderBytes) +
                     " bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("bad magic at byte 0");
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kDatasetVersion) {
    throw ParseError("unsupported version " + std::to_string(version) + " at byte 4");
  }
  const auto n = get<std::uint64_t>(bytes, 8);
  const auto d = get<std::uint32_t>(bytes, 16);
  if (n == 0 || d == 0) throw ParseError("empty dataset declared at byte 8 (n and d must be >= 1)");
  const std::size_t expected = kDatasetHeaderBytes + n * d * sizeof(float);
  if (bytes.size() != expected) {
    throw ParseError("payload length mismatch: expected " + std::to_string(expected) +
                     " bytes for n=" + std::to_string(n) + ", d=" + std::to_string(d) + ", got " +
                     std::to_string(bytes.size()));
  }
  PointMatrix points(static_cast<Index>(n), static_cast<Index>(d));
  std::memcpy(points.data(), bytes.data() + kDatasetHeaderBytes, n * d * sizeof(float));
  check_finite(points, "binary dataset");
  return points;
}

PointMatrix parse_csv(const std::string& text) {
  std::vector<float> values;
  Index d = 0;
  Index rows = 0;
  std::istringstream in(text);
  std::string line;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    Index cols = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      float v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw ParseError("line " + std::to_string(line_no) + ", column " +
                         std::to_string(cols + 1) + ": not a number");
      }
      values.push_back(v);
      ++cols;
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') {
        throw ParseError("line " + std::to_string(line_no) + ": unexpected character '" +
                         std::string(1, *p) + "'");
      }
      ++p;
    }
    if (d == 0) d = cols;
    if (cols != d) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(d) +
                       " values, got " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("CSV input contains no points");
  PointMatrix points = PointsMap<float>(values.data(), rows, d);
  check_finite(points, "CSV dataset");
  return points;
}

PointMatrix load_dataset(const std::filesystem::path& path, DataFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    if (format == DataFormat::Binary) return decode_binary(bytes);
    return parse_csv(std::string(bytes.begin(), bytes.end()));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_dataset(const std::filesystem::path& path, const PointMatrix& points, DataFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (format == DataFormat::Binary) {
    const auto bytes = encode_binary(points);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    char buf[32];
    for (Index i = 0; i < points.rows(); ++i) {
      for (Index j = 0; j < points.cols(); ++j) {
        if (j) out.put(',');
        // Shortest representation that reads back to the same float.
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), points(i, j));
        out.write(buf, end - buf);
      }
      out.put('\n');
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "uniform") return SyntheticKind::Uniform;
  if (name == "gaussian-mixture" || name == "mixture") return SyntheticKind::GaussianMixture;
  throw std::invalid_argument("unknown synthetic kind '" + name +
                              "' (expected uniform or gaussian-mixture)");
}

SyntheticData gen_synthetic(SyntheticKind kind, Index n, Index d, std::uint64_t seed,
                            Index components, float spread) {
  if (n < 1 || d < 1) throw std::invalid_argument("gen_synthetic: n and d must be >= 1");
  std::mt19937_64 rng(seed);
  SyntheticData data;
  data.points.resize(n, d);
  if (kind == SyntheticKind::Uniform) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < d; ++j) data.points(i, j) = unit_float(rng);
    }
    return data;
  }
  if (components < 1) throw std::invalid_argument("gen_synthetic: need at least one component");
  data.centers.resize(components, d);
  for (Index c = 0; c < components; ++c) {
    for (Index j = 0; j < d; ++j) data.centers(c, j) = unit_float(rng);
  }
  std::uniform_int_distribution<Index> pick(0, components - 1);
  std::normal_distribution<float> noise(0.0f, spread);
  data.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Index c = pick(rng);
    data.labels[static_cast<std::size_t>(i)] = c;
    for (Index j = 0; j < d; ++j) data.points(i, j) = data.centers(c, j) + noise(rng);
  }
  return data;
}

SyntheticData gen_planted_outliers(Index n, Index d, Index num_outliers, std::uint64_t seed) {
  if (num_outliers < 0 || num_outliers >= n) {
    throw std::invalid_argument("gen_planted_outliers: need 0 <= outliers < n");
  }
  SyntheticData base = gen_synthetic(SyntheticKind::GaussianMixture, n - num_outliers, d, seed);
  SyntheticData data;
  data.centers = base.centers;
  data.labels = base.labels;
  data.points.resize(n, d);
  data.points.topRows(n - num_outliers) = base.points;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (Index t = 0; t < num_outliers; ++t) {
    // Each outlier sits on its own axis/sign ray, several units out, so it is
    // far from the unit cube and from the other outliers.
    const Index axis = t % d;
    const float sign = ((t / d) % 2 == 0) ? 1.0f : -1.0f;
    const float reach = 5.0f + 2.0f * static_cast<float>(t) + unit_float(rng);
    const Index row = n - num_outliers + t;
    data.points.row(row).setConstant(0.5f);
    data.points(row, axis) += sign * reach;
    data.labels.push_back(-1);
  }
  return data;
}

}  // namespace bkdt
