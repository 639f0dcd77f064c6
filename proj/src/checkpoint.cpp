#include "dslab/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dslab {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'L', 'A', 'B', 'C', 'K', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& is, std::vector<double>& v, std::size_t n) {
  v.resize(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

std::string config_hash(const Json& config) {
  std::string dump = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_checkpoint(const std::string& path, const ParamStore& params, const AdamState& adam,
                     const Json& manifest) {
  Json header;
  header["version"] = 1;
  header["manifest"] = manifest;
  header["adam"] = {{"lr", adam.lr},
                    {"beta1", adam.beta1},
                    {"beta2", adam.beta2},
                    {"eps", adam.eps},
                    {"weight_decay", adam.weight_decay},
                    {"step", adam.step},
                    {"skipped_nonfinite", adam.skipped_nonfinite}};
  Json plist = Json::array();
  for (const auto& name : params.names()) {
    plist.push_back({{"name", name}, {"shape", params.at(name).shape()}});
  }
  header["params"] = plist;
  std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("save_checkpoint: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  static const std::vector<double> empty;
  for (const auto& name : params.names()) {
    const Tensor& p = params.at(name);
    write_doubles(os, p.values());
    auto mi = adam.m.find(name);
    auto vi = adam.v.find(name);
    std::vector<double> zeros;
    const std::vector<double>* m = (mi != adam.m.end() && mi->second.size() == p.size())
                                       ? &mi->second
                                       : (zeros.assign(p.size(), 0.0), &zeros);
    write_doubles(os, *m);
    const std::vector<double>* v = (vi != adam.v.end() && vi->second.size() == p.size())
                                       ? &vi->second
                                       : (zeros.assign(p.size(), 0.0), &zeros);
    write_doubles(os, *v);
  }
  if (!os) throw Error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error("load_checkpoint: bad magic in " + path);
  std::uint64_t hlen = read_u64(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  Json header = Json::parse(hs);
  if (header.value("version", 0) != 1)
    throw Error("load_checkpoint: unsupported version in " + path);

  Checkpoint ck;
  ck.manifest = header["manifest"];
  const Json& a = header["adam"];
  ck.adam.lr = a["lr"];
  ck.adam.beta1 = a["beta1"];
  ck.adam.beta2 = a["beta2"];
  ck.adam.eps = a["eps"];
  ck.adam.weight_decay = a["weight_decay"];
  ck.adam.step = a["step"];
  ck.adam.skipped_nonfinite = a["skipped_nonfinite"];
  for (const auto& pj : header["params"]) {
    std::string name = pj["name"];
    Shape shape = pj["shape"].get<Shape>();
    std::size_t n = shape_numel(shape);
    std::vector<double> vals;
    read_doubles(is, vals, n);
    Tensor p = Tensor::from_values(shape, std::move(vals));
    ck.params.add(name, p);
    read_doubles(is, ck.adam.m[name], n);
    read_doubles(is, ck.adam.v[name], n);
  }
  if (!is) throw Error("load_checkpoint: truncated file " + path);
  return ck;
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("file_fingerprint: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

}  // namespace dslab
