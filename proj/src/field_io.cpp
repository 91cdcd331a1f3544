#include "windscale/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "windscale/error.hpp"

namespace windscale {

static_assert(std::endian::native == std::endian::little,
              "field container IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'W', 'S', 'F', 'I', 'E', 'L', 'D', '1'};
constexpr std::uint32_t kMaxString = 1U << 16;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw FileError("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void put_bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw FileError("write failed for " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw FileError("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    T value{};
    get_bytes(&value, sizeof(T));
    return value;
  }
  std::string get_string() {
    auto n = get<std::uint32_t>();
    if (n > kMaxString) throw FileError(path_.string() + ": implausible string length");
    std::string s(n, '\0');
    get_bytes(s.data(), n);
    return s;
  }
  void get_bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw FileError(path_.string() + ": truncated field container");
    }
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

void write_fields(const std::filesystem::path& path, const std::vector<NamedField>& fields) {
  Writer w(path);
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put(static_cast<std::uint32_t>(fields.size()));
  for (const auto& [name, grid] : fields) {
    if (grid.empty()) throw ShapeError("cannot write empty field '" + name + "'");
    w.put_string(name);
    w.put_string(grid.timestamp());
    w.put(grid.spacing_km());
    w.put(static_cast<std::uint32_t>(grid.channel_count()));
    w.put(static_cast<std::uint64_t>(grid.height()));
    w.put(static_cast<std::uint64_t>(grid.width()));
    for (auto v : grid.channels()) {
      w.put_string(std::string(variable_name(v)));
      w.put_string(std::string(variable_info(v).units));
    }
    const auto& data = grid.data();
    w.put_bytes(data.data_ptr<double>(), static_cast<std::size_t>(data.numel()) * sizeof(double));
  }
  w.finish(path);
}

std::vector<NamedField> read_fields(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.get_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FileError(path.string() + " is not a windscale field container");
  }
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedField> out;
  out.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    NamedField nf;
    nf.name = r.get_string();
    auto timestamp = r.get_string();
    const auto spacing = r.get<double>();
    const auto c = r.get<std::uint32_t>();
    const auto h = r.get<std::uint64_t>();
    const auto w = r.get<std::uint64_t>();
    if (c == 0 || c > 64 || h == 0 || w == 0 || h * w > (1ULL << 32)) {
      throw FileError(path.string() + ": implausible field shape");
    }
    std::vector<Variable> channels;
    for (std::uint32_t i = 0; i < c; ++i) {
      auto name = r.get_string();
      auto units = r.get_string();
      auto v = parse_variable(name);
      if (!v) throw FileError(path.string() + ": unknown channel '" + name + "'");
      if (variable_info(*v).units != units) {
        throw FileError(path.string() + ": channel " + name + " has units '" + units +
                        "', expected '" + std::string(variable_info(*v).units) + "'");
      }
      channels.push_back(*v);
    }
    auto data = torch::empty({static_cast<std::int64_t>(c), static_cast<std::int64_t>(h),
                              static_cast<std::int64_t>(w)},
                             torch::kFloat64);
    r.get_bytes(data.data_ptr<double>(), static_cast<std::size_t>(data.numel()) * sizeof(double));
    nf.grid = FieldGrid::unvalidated(std::move(channels), data, spacing, std::move(timestamp));
    out.push_back(std::move(nf));
  }
  return out;
}

void write_field(const std::filesystem::path& path, const FieldGrid& grid) {
  write_fields(path, {{"field", grid}});
}

FieldGrid read_field(const std::filesystem::path& path) {
  auto fields = read_fields(path);
  if (fields.size() != 1) {
    throw FileError(path.string() + " holds " + std::to_string(fields.size()) +
                    " grids, expected exactly one");
  }
  return fields.front().grid;
}

const FieldGrid& find_field(const std::vector<NamedField>& fields, const std::string& name) {
  for (const auto& f : fields) {
    if (f.name == name) return f.grid;
  }
  throw FileError("field container has no entry '" + name + "'");
}

void write_pair(const std::filesystem::path& path, const SamplePair& pair) {
  write_fields(path, {{"low", pair.low}, {"high", pair.high}});
}

SamplePair read_pair(const std::filesystem::path& path, const FieldGrid& covariates) {
  auto fields = read_fields(path);
  SamplePair pair;
  pair.low = find_field(fields, "low");
  pair.high = find_field(fields, "high");
  pair.covariates = covariates;
  pair.timestamp = pair.high.timestamp();
  return pair;
}

}  // namespace windscale
