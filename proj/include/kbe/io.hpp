#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <locale>
#include <map>
#include <sstream>

#include <json.hpp>

#include "contour.hpp"

// Container file: a magic line, the manifest length in bytes, a JSON manifest
// and raw dataset blobs. Complex numbers are little-endian (re, im) doubles,
// d*d blocks row-major; ret/les use the triangular index n(n+1)/2 + j.
namespace kbe {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

inline constexpr const char* magic = "KBECNTR 1";

namespace detail {

inline void put_doubles(std::ostream& os, const std::vector<cplx>& v) {
  static_assert(sizeof(cplx) == 2 * sizeof(double));
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(cplx)));
  } else {
    for (const cplx& z : v)
      for (double x : {z.real(), z.imag()}) {
        auto b = std::bit_cast<std::array<char, 8>>(x);
        std::reverse(b.begin(), b.end());
        os.write(b.data(), 8);
      }
  }
}

inline void get_doubles(const std::string& blob, size_t offset, std::vector<cplx>& v) {
  const size_t bytes = v.size() * sizeof(cplx);
  if (offset + bytes > blob.size()) throw FormatError("container: dataset extends past end of file");
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(v.data(), blob.data() + offset, bytes);
  } else {
    for (size_t i = 0; i < 2 * v.size(); ++i) {
      std::array<char, 8> b;
      std::memcpy(b.data(), blob.data() + offset + 8 * i, 8);
      std::reverse(b.begin(), b.end());
      reinterpret_cast<double*>(v.data())[i] = std::bit_cast<double>(b);
    }
  }
}

inline size_t tri_count(int nt) { return nt < 0 ? 0 : static_cast<size_t>(nt + 1) * (nt + 2) / 2; }

// Expected element counts (blocks) for each dataset.
inline std::map<std::string, size_t> counts(int nt, int ntau) {
  return {{"mat", static_cast<size_t>(ntau + 1)},
          {"ret", tri_count(nt)},
          {"les", tri_count(nt)},
          {"tv", nt < 0 ? 0 : static_cast<size_t>(nt + 1) * (ntau + 1)}};
}

}  // namespace detail

using Groups = std::vector<std::pair<std::string, const HermMatrix*>>;

// `meta` is copied verbatim into the manifest (run parameters and the like).
inline void write_container(const std::string& path, const Groups& groups, const nlohmann::json& meta = nullptr) {
  nlohmann::ordered_json man;
  man["format"] = magic;
  if (!meta.is_null()) man["meta"] = meta;
  size_t offset = 0;
  for (const auto& [name, c] : groups) {
    require(!name.empty() && c != nullptr, "write_container: empty group");
    require(!man["groups"].contains(name), "write_container: duplicate group " + name);
    auto& g = man["groups"][name];
    g["element_size"] = c->element_size();
    g["nt"] = c->nt();
    g["ntau"] = c->ntau();
    g["sig"] = c->sig();
    g["size1"] = c->size();
    g["size2"] = c->size();
    const std::map<std::string, const std::vector<cplx>*> data{
        {"mat", &c->mat_data()}, {"ret", &c->ret_data()}, {"les", &c->les_data()}, {"tv", &c->tv_data()}};
    for (const char* ds : {"mat", "ret", "les", "tv"}) {
      const size_t count = data.at(ds)->size() / c->element_size();
      g["datasets"][ds] = {{"offset", offset}, {"count", count}, {"shape", {count, c->size(), c->size()}}};
      offset += data.at(ds)->size() * sizeof(cplx);
    }
  }
  const std::string text = man.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_container: cannot open " + path);
  os << magic << '\n' << text.size() << '\n' << text;
  for (const auto& [name, c] : groups)
    for (const auto* v : {&c->mat_data(), &c->ret_data(), &c->les_data(), &c->tv_data()}) detail::put_doubles(os, *v);
  if (!os) throw std::runtime_error("write_container: write failed for " + path);
}

inline void write_container(const std::string& path, const std::string& group, const HermMatrix& c) {
  write_container(path, Groups{{group, &c}});
}

// Parsed container: manifest plus the raw data section.
class Container {
 public:
  explicit Container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_container: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != magic) throw FormatError("container: bad magic line in " + path);
    if (!std::getline(is, line)) throw FormatError("container: missing manifest length");
    size_t len = 0;
    try {
      size_t pos = 0;
      len = std::stoull(line, &pos);
      if (pos != line.size()) throw FormatError("container: bad manifest length");
    } catch (const std::logic_error&) {
      throw FormatError("container: bad manifest length");
    }
    std::string text(len, '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("container: truncated manifest");
    try {
      man_ = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("container: malformed manifest: ") + e.what());
    }
    data_.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    if (!man_.is_object() || !man_.contains("groups") || !man_["groups"].is_object())
      throw FormatError("container: manifest has no groups");
  }

  std::vector<std::string> groups() const {
    std::vector<std::string> out;
    for (auto it = man_["groups"].begin(); it != man_["groups"].end(); ++it) out.push_back(it.key());
    return out;
  }

  const nlohmann::json& manifest() const { return man_; }

  HermMatrix read(const std::string& group) const {
    if (!man_["groups"].contains(group)) throw FormatError("container: no group " + group);
    const auto& g = man_["groups"][group];
    int nt, ntau, sig, s1, s2, es;
    try {
      nt = g.at("nt").get<int>();
      ntau = g.at("ntau").get<int>();
      sig = g.at("sig").get<int>();
      s1 = g.at("size1").get<int>();
      s2 = g.at("size2").get<int>();
      es = g.at("element_size").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("container: malformed group header: ") + e.what());
    }
    if (s1 != s2 || es != s1 * s2 || s1 < 1 || nt < -1 || ntau < 0 || (sig != FERMION && sig != BOSON))
      throw FormatError("container: inconsistent header integers in group " + group);
    HermMatrix c(nt, ntau, s1, sig);
    const auto expect = detail::counts(nt, ntau);
    const std::map<std::string, std::vector<cplx>*> data{
        {"mat", &c.mat_data()}, {"ret", &c.ret_data()}, {"les", &c.les_data()}, {"tv", &c.tv_data()}};
    for (const auto& [name, vec] : data) {
      size_t offset, count;
      try {
        const auto& ds = g.at("datasets").at(name);
        offset = ds.at("offset").get<size_t>();
        count = ds.at("count").get<size_t>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("container: malformed dataset entry: ") + e.what());
      }
      if (count != expect.at(name)) throw FormatError("container: length of " + name + " does not match header");
      detail::get_doubles(data_, offset, *vec);
    }
    return c;
  }

 private:
  nlohmann::json man_;
  std::string data_;
};

inline HermMatrix read_container(const std::string& path, const std::string& group) {
  return Container(path).read(group);
}

// ---- CSV ----

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    require(row.size() == header.size(), "Table: row width differs from header");
    rows.push_back(std::move(row));
  }
  std::vector<double> column(size_t i) const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.at(i));
    return out;
  }
};

inline void write_csv(std::ostream& os, const Table& t) {
  os.imbue(std::locale::classic());
  os << std::setprecision(17);
  for (size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
}

inline void export_csv(const std::string& path, const Table& t) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("export_csv: cannot open " + path);
  write_csv(os, t);
}

inline Table read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_csv: cannot open " + path);
  Table t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
  };
  if (!std::getline(is, line)) throw FormatError("read_csv: empty file");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(line)) {
      std::istringstream fs(f);
      fs.imbue(std::locale::classic());
      double x;
      if (!(fs >> x)) throw FormatError("read_csv: bad number '" + f + "'");
      row.push_back(x);
    }
    if (row.size() != t.header.size()) throw FormatError("read_csv: row width differs from header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace io
}  // namespace kbe
