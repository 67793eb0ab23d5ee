#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "pgff/error.hpp"
#include "pgff/inversion.hpp"
#include "pgff/io/csv.hpp"
#include "pgff/lti/polynomial.hpp"
#include "pgff/plant/two_mass.hpp"

namespace pgff::pipeline {

using nlohmann::json;

inline constexpr int kArtifactSchemaVersion = 1;

inline json complex_list(const std::vector<Complex>& zs) {
  json a = json::array();
  for (const Complex& z : zs) a.push_back({z.real(), z.imag()});
  return a;
}

inline std::vector<Complex> complex_list_from(const json& a) {
  std::vector<Complex> out;
  for (const json& z : a) out.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
  return out;
}

/// Roots sorted by real part, then imaginary part, for stable reports.
inline std::vector<Complex> sorted_roots(const lti::Polynomial& p) {
  if (p.degree() < 1) return {};
  std::vector<Complex> r = lti::polynomial_roots(p);
  std::sort(r.begin(), r.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return r;
}

/// The linear feedforward controller plus the plant model it inverts.
struct LinearArtifact {
  inversion::StableInverseFF ff;
  plant::TwoMsdParams model;
  double Ts = 0.0;
};

inline json to_json(const LinearArtifact& a, const json& metadata) {
  const inversion::StableInverseFF& ff = a.ff;
  json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["kind"] = "pgff.stable_inverse_ff";
  j["method"] = ff.method == inversion::StableInversionMethod::zpetc ? "zpetc" : "noncausal";
  j["Ts"] = a.Ts;
  j["eta0"] = ff.eta0;
  j["n_ep"] = ff.n_ep;
  j["preview"] = ff.preview();
  j["noncausal_order"] = ff.noncausal_order;
  j["tail_bound"] = ff.tail_bound;
  j["unstable_poles"] = complex_list(ff.unstable_poles);
  j["kff_num"] = ff.kff.num.coeffs();
  j["kff_den"] = ff.kff.den.coeffs();
  json model;
  const auto v = a.model.values();
  for (std::size_t i = 0; i < v.size(); ++i) model[plant::TwoMsdParams::kNames[i]] = v[i];
  j["model"] = model;
  j["metadata"] = metadata;
  return j;
}

inline LinearArtifact linear_artifact_from_json(const json& j) {
  try {
    if (j.at("kind").get<std::string>() != "pgff.stable_inverse_ff")
      throw ConfigError("linear artifact: wrong kind");
    if (j.at("schema_version").get<int>() != kArtifactSchemaVersion)
      throw ConfigError("linear artifact: unsupported schema version");
    LinearArtifact a;
    a.Ts = j.at("Ts").get<double>();
    inversion::StableInverseFF& ff = a.ff;
    const std::string method = j.at("method").get<std::string>();
    if (method != "zpetc" && method != "noncausal") throw ConfigError("linear artifact: unknown method " + method);
    ff.method = method == "zpetc" ? inversion::StableInversionMethod::zpetc : inversion::StableInversionMethod::noncausal;
    ff.eta0 = j.at("eta0").get<int>();
    ff.n_ep = j.at("n_ep").get<int>();
    ff.noncausal_order = j.at("noncausal_order").get<int>();
    ff.tail_bound = j.at("tail_bound").get<double>();
    ff.unstable_poles = complex_list_from(j.at("unstable_poles"));
    ff.kff = lti::RationalTransferFunction(lti::Polynomial(j.at("kff_num").get<std::vector<double>>()),
                                           lti::Polynomial(j.at("kff_den").get<std::vector<double>>()), a.Ts);
    std::array<double, plant::TwoMsdParams::kCount> v{};
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = j.at("model").at(plant::TwoMsdParams::kNames[i]).get<double>();
    a.model = plant::TwoMsdParams::from_values(v);
    require(ff.eta0 >= 1 && ff.n_ep >= 0 && a.Ts > 0.0, "linear artifact: invalid preview or sampling time");
    return a;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("linear artifact: ") + e.what());
  }
}

inline void save_linear_artifact(const LinearArtifact& a, const std::filesystem::path& path, const json& metadata) {
  io::write_json(path, to_json(a, metadata));
}

inline LinearArtifact load_linear_artifact(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ConfigError("missing linear controller artifact " + path.string() + " (run design-linear first)");
  return linear_artifact_from_json(io::read_json(path));
}

}  // namespace pgff::pipeline
