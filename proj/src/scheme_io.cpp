#include <charconv>

#include "flatcrit/error.hpp"
#include "flatcrit/inducing.hpp"
#include "json.hpp"

namespace flatcrit {

namespace {

using nlohmann::json;

std::string real(double x) { return format_17(x); }

double parse_real(const json& j, const char* field) {
  if (!j.contains(field)) throw Error(ErrorKind::ValidationError, std::string("scheme cache: missing ") + field);
  const json& v = j.at(field);
  if (v.is_number()) return v.get<double>();
  const std::string s = v.get<std::string>();
  if (s == "nan") return kNaN;
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ValidationError, std::string("scheme cache: bad number in ") + field);
  }
  return x;
}

}  // namespace

std::string scheme_to_json(const InducingScheme& scheme) {
  const FlatUnimodalMap& map = *scheme.map;
  json j;
  j["map_fingerprint"] = scheme.map_fingerprint;
  j["interval"] = {{"a_minus", real(scheme.interval.a_minus)},
                   {"a_plus", real(scheme.interval.a_plus)},
                   {"tau", real(scheme.interval.tau)},
                   {"K_tau", real(scheme.interval.K_tau)}};
  j["n_max"] = scheme.n_max;
  j["tol"] = real(scheme.tol);
  j["unresolved_mass"] = real(scheme.unresolved_mass);
  j["max_endpoint_residual"] = real(scheme.max_endpoint_residual);
  json branches = json::array();
  for (const Branch& b : scheme.branches) {
    json e;
    e["lo"] = real(map.to_plain(b.lo));
    e["hi"] = real(map.to_plain(b.hi));
    e["R"] = b.R;
    e["side"] = side_name(b.side);
    e["log_measure"] = real(b.log_measure);
    if (b.lo.is_near_c() || b.hi.is_near_c()) e["chart"] = chart_name(ChartPoint::near_c(b.side, 0.0).tag);
    e["u_lo"] = real(b.u_lo);
    e["u_hi"] = real(b.u_hi);
    e["log_df"] = {real(b.log_df_lo), real(b.log_df_mid), real(b.log_df_hi)};
    e["u_periodic"] = real(b.u_periodic);
    e["log_df_periodic"] = real(b.log_df_periodic);
    branches.push_back(std::move(e));
  }
  j["branches"] = std::move(branches);
  json tail = json::array();
  for (double v : scheme.log_tail) tail.push_back(real(v));
  j["log_tail"] = std::move(tail);
  return j.dump(1);
}

InducingScheme scheme_from_json(std::string_view text, std::shared_ptr<const FlatUnimodalMap> map) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string("scheme cache: ") + e.what());
  }
  try {
    InducingScheme s;
    s.map_fingerprint = j.at("map_fingerprint").get<std::string>();
    if (s.map_fingerprint != map->fingerprint()) {
      throw Error(ErrorKind::ValidationError, "scheme cache: map fingerprint mismatch");
    }
    s.map = std::move(map);
    const json& iv = j.at("interval");
    s.interval = {parse_real(iv, "a_minus"), parse_real(iv, "a_plus"), parse_real(iv, "tau"),
                  parse_real(iv, "K_tau")};
    s.n_max = j.at("n_max").get<int>();
    s.tol = parse_real(j, "tol");
    s.unresolved_mass = parse_real(j, "unresolved_mass");
    s.max_endpoint_residual = parse_real(j, "max_endpoint_residual");
    for (const json& e : j.at("branches")) {
      Branch b;
      b.R = e.at("R").get<int>();
      b.side = parse_side(e.at("side").get<std::string>());
      b.log_measure = parse_real(e, "log_measure");
      b.u_lo = parse_real(e, "u_lo");
      b.u_hi = parse_real(e, "u_hi");
      b.lo = s.map->normalize(ChartPoint::near_c(b.side, b.u_lo));
      b.hi = s.map->normalize(ChartPoint::near_c(b.side, b.u_hi));
      const json& d = e.at("log_df");
      b.log_df_lo = parse_real(json{{"v", d.at(0)}}, "v");
      b.log_df_mid = parse_real(json{{"v", d.at(1)}}, "v");
      b.log_df_hi = parse_real(json{{"v", d.at(2)}}, "v");
      b.u_periodic = parse_real(e, "u_periodic");
      b.log_df_periodic = parse_real(e, "log_df_periodic");
      s.branches.push_back(b);
    }
    for (const json& v : j.at("log_tail")) s.log_tail.push_back(parse_real(json{{"v", v}}, "v"));
    if (static_cast<int>(s.log_tail.size()) != s.n_max + 1) {
      throw Error(ErrorKind::ValidationError, "scheme cache: log_tail has the wrong length");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ValidationError, std::string("scheme cache: ") + e.what());
  }
}

}  // namespace flatcrit
