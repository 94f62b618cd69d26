#include "fracinv/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fracinv/errors.hpp"

namespace fracinv {

static_assert(std::endian::native == std::endian::little, "payload is written in host order");

namespace {

using nlohmann::json;

constexpr const char* kMagic = "FRACINV-DATASET v1\n";

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

json box_json(const RegionBox& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

RegionBox box_from(const json& j) {
  RegionBox b;
  b.lo = j.at("lo").get<std::array<double, 3>>();
  b.hi = j.at("hi").get<std::array<double, 3>>();
  return b;
}

json profile_json(const TemporalProfile& p) {
  if (const auto* t = std::get_if<TriangularPulse>(&p)) return {{"type", "pulse"}, {"t", t->t}};
  if (const auto* b = std::get_if<SmoothBump>(&p)) return {{"type", "bump"}, {"T0", b->T0}};
  return {{"type", "samples"}, {"values", std::get<SampledProfile>(p).values}};
}

TemporalProfile profile_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "pulse") return TriangularPulse{j.at("t").get<double>()};
  if (type == "bump") return SmoothBump{j.at("T0").get<double>()};
  if (type == "samples") return SampledProfile{j.at("values").get<std::vector<double>>()};
  throw IoError("unknown profile type '" + type + "'");
}

void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw IoError("dataset truncated");
  return v;
}

std::string get_bytes(std::istream& is, std::uint64_t n) {
  if (n > (std::uint64_t(1) << 36)) throw IoError("dataset section length implausible");
  std::string s(n, '\0');
  if (!is.read(s.data(), std::streamsize(n))) throw IoError("dataset truncated");
  return s;
}

struct Sections {
  std::string header, sealed, payload;
};

Sections read_sections(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset '" + path + "'");
  std::string magic(std::strlen(kMagic), '\0');
  if (!is.read(magic.data(), std::streamsize(magic.size())) || magic != kMagic)
    throw IoError("'" + path + "' is not a dataset file");
  Sections s;
  s.header = get_bytes(is, get_u64(is));
  s.sealed = get_bytes(is, get_u64(is));
  s.payload.assign(std::istreambuf_iterator<char>(is), {});
  return s;
}

}  // namespace

ModelManifold ManifoldSpec::build() const {
  if (kind == ManifoldKind::torus) {
    if (resolution.empty()) throw ValidationError("torus needs a resolution");
    return ModelManifold::torus(dim, resolution.front());
  }
  if (resolution.size() != 2) throw ValidationError("sphere needs {n_theta, n_phi}");
  return ModelManifold::sphere(resolution[0], resolution[1]);
}

void write_dataset(const std::string& path, const MeasurementSet& ms,
                   const std::optional<SealedTruth>& sealed) {
  std::string payload;
  json recs = json::array();
  std::size_t receivers = 0;
  for (const auto& r : ms.records) {
    if (receivers == 0) receivers = std::size_t(r.values.cols());
    if (std::size_t(r.values.cols()) != receivers) throw ShapeMismatch("records disagree on |W2|");
    const std::size_t offset = payload.size();
    for (Eigen::Index n = 0; n < r.values.rows(); ++n)
      for (Eigen::Index j = 0; j < r.values.cols(); ++j) {
        const double re = r.values(n, j).real(), im = r.values(n, j).imag();
        payload.append(reinterpret_cast<const char*>(&re), 8);
        payload.append(reinterpret_cast<const char*>(&im), 8);
      }
    recs.push_back({{"profile", profile_json(r.profile)},
                    {"xi", r.xi},
                    {"h", r.h},
                    {"nodes", r.values.rows()},
                    {"offset", offset}});
  }
  json header = {{"format", "FRACINV-DATASET"},
                 {"version", 1},
                 {"manifold",
                  {{"kind", ms.manifold.kind == ManifoldKind::torus ? "torus" : "sphere"},
                   {"dim", ms.manifold.dim},
                   {"resolution", ms.manifold.resolution}}},
                 {"w1", box_json(ms.w1)},
                 {"w2", box_json(ms.w2)},
                 {"receivers", receivers},
                 {"records", recs},
                 {"payload_bytes", payload.size()},
                 {"payload_fnv1a", fnv1a(payload)}};
  json sj = json::object();
  if (sealed) sj = {{"alpha", sealed->alpha}, {"beta", sealed->beta}, {"lambda_max", sealed->lambda_max}};
  const std::string hs = header.dump(), ss = sj.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write dataset '" + path + "'");
  os.write(kMagic, std::streamsize(std::strlen(kMagic)));
  put_u64(os, hs.size());
  os.write(hs.data(), std::streamsize(hs.size()));
  put_u64(os, ss.size());
  os.write(ss.data(), std::streamsize(ss.size()));
  os.write(payload.data(), std::streamsize(payload.size()));
  if (!os) throw IoError("failed writing dataset '" + path + "'");
}

MeasurementSet read_dataset(const std::string& path) {
  const Sections sec = read_sections(path);
  json h;
  try {
    h = json::parse(sec.header);
  } catch (const json::exception& e) {
    throw IoError(std::string("dataset header unreadable: ") + e.what());
  }
  try {
    if (h.at("format") != "FRACINV-DATASET" || h.at("version") != 1)
      throw IoError("unsupported dataset version");
    if (sec.payload.size() != h.at("payload_bytes").get<std::size_t>())
      throw IoError("dataset payload has the wrong length");
    if (fnv1a(sec.payload) != h.at("payload_fnv1a").get<std::uint64_t>())
      throw IoError("dataset payload checksum mismatch");
    MeasurementSet ms;
    const auto& m = h.at("manifold");
    ms.manifold.kind = m.at("kind") == "torus" ? ManifoldKind::torus : ManifoldKind::sphere;
    ms.manifold.dim = m.at("dim").get<int>();
    ms.manifold.resolution = m.at("resolution").get<std::vector<int>>();
    ms.w1 = box_from(h.at("w1"));
    ms.w2 = box_from(h.at("w2"));
    const auto receivers = h.at("receivers").get<std::size_t>();
    for (const auto& rj : h.at("records")) {
      MeasurementRecord r;
      r.profile = profile_from(rj.at("profile"));
      r.xi = rj.at("xi").get<std::vector<double>>();
      r.h = rj.at("h").get<double>();
      const auto nodes = rj.at("nodes").get<std::size_t>();
      const auto offset = rj.at("offset").get<std::size_t>();
      if (offset + nodes * receivers * 16 > sec.payload.size()) throw IoError("record exceeds payload");
      r.values.resize(Eigen::Index(nodes), Eigen::Index(receivers));
      const char* p = sec.payload.data() + offset;
      for (std::size_t n = 0; n < nodes; ++n)
        for (std::size_t j = 0; j < receivers; ++j, p += 16) {
          double re, im;
          std::memcpy(&re, p, 8);
          std::memcpy(&im, p + 8, 8);
          r.values(Eigen::Index(n), Eigen::Index(j)) = {re, im};
        }
      ms.records.push_back(std::move(r));
    }
    return ms;
  } catch (const json::exception& e) {
    throw IoError(std::string("dataset header malformed: ") + e.what());
  }
}

std::optional<SealedTruth> read_sealed(const std::string& path) {
  const Sections sec = read_sections(path);
  try {
    const json j = json::parse(sec.sealed);
    if (j.empty()) return std::nullopt;
    return SealedTruth{j.at("alpha").get<double>(), j.at("beta").get<double>(),
                       j.at("lambda_max").get<double>()};
  } catch (const json::exception& e) {
    throw IoError(std::string("sealed section unreadable: ") + e.what());
  }
}

}  // namespace fracinv
