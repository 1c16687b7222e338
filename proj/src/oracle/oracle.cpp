#include "confattr/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "confattr/error.hpp"

namespace confattr::oracle {

namespace {

Rational parse_rational(const nlohmann::json& j, const std::string& field) {
  std::string text;
  if (j.is_string()) {
    text = j.get<std::string>();
  } else if (j.is_number_integer()) {
    text = std::to_string(j.get<long long>());
  } else {
    throw Error(ErrorCode::InvalidSpec, "field '" + field + "' must be a rational string such as \"1/3\"");
  }
  Rational r;
  if (r.set_str(text, 10) != 0) throw Error(ErrorCode::InvalidSpec, "field '" + field + "': bad rational '" + text + "'");
  r.canonicalize();
  return r;
}

bool matches(const Cell& c, const std::vector<std::size_t>& members, const std::vector<int>& x_s) {
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (c.x[members[k]] != x_s[k]) return false;
  }
  return true;
}

// Conditional moments over the cells matching x_S.
struct Moments {
  Rational mass, pi, mu0, mu1, pi_mu0, pi_mu1, treated_y, control_y, control;
};

Moments moments(const DiscreteJoint& dist, const CoalitionMask& mask, const std::vector<int>& x_s) {
  if (mask.width() != dist.p) throw Error(ErrorCode::WidthMismatch, "mask width differs from the table's p");
  const auto members = mask.indices();
  if (members.size() != x_s.size()) throw Error(ErrorCode::WidthMismatch, "x_S length differs from |S|");
  Moments m;
  for (const auto& c : dist.cells) {
    if (!matches(c, members, x_s)) continue;
    m.mass += c.prob;
    m.pi += c.prob * c.pi;
    m.mu0 += c.prob * c.mu0;
    m.mu1 += c.prob * c.mu1;
    m.pi_mu0 += c.prob * c.pi * c.mu0;
    m.pi_mu1 += c.prob * c.pi * c.mu1;
    m.treated_y += c.prob * c.pi * c.mu1;
    m.control_y += c.prob * (1 - c.pi) * c.mu0;
    m.control += c.prob * (1 - c.pi);
  }
  if (m.mass == 0) throw Error(ErrorCode::ZeroMassSubgroup, "subgroup x_S has zero probability");
  if (m.pi == 0 || m.control == 0) throw Error(ErrorCode::DegenerateArm, "a treatment arm is empty within the subgroup");
  return m;
}

}  // namespace

void DiscreteJoint::validate() const {
  if (cells.empty()) throw Error(ErrorCode::InvalidSpec, "table has no cells");
  Rational total;
  std::set<std::vector<int>> seen;
  for (const auto& c : cells) {
    if (c.x.size() != p) throw Error(ErrorCode::InvalidSpec, "cell tuple width differs from p");
    if (!seen.insert(c.x).second) throw Error(ErrorCode::InvalidSpec, "duplicate cell tuple");
    if (c.prob < 0) throw Error(ErrorCode::InvalidSpec, "negative cell probability");
    if (!(c.pi > 0 && c.pi < 1)) throw Error(ErrorCode::InvalidSpec, "pi must lie strictly between 0 and 1");
    total += c.prob;
  }
  if (total != 1) throw Error(ErrorCode::InvalidSpec, "cell probabilities sum to " + total.get_str() + ", not 1");
}

DiscreteJoint cancellation_example() {
  DiscreteJoint d;
  d.p = 2;
  const Rational quarter(1, 4);
  const Rational pi[4] = {Rational(1, 3), Rational(3, 10), Rational(1, 10), Rational(9, 10)};
  const Rational m[4] = {Rational(0), Rational(-3, 2), Rational(-4, 3), Rational(-7, 6)};
  for (int k = 0; k < 4; ++k) d.cells.push_back({{k >> 1, k & 1}, quarter, pi[k], m[k], m[k]});
  return d;
}

DiscreteJoint parse_discrete_joint(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("malformed table JSON: ") + e.what());
  }
  if (!j.contains("p") || !j.contains("cells")) throw Error(ErrorCode::InvalidSpec, "table needs 'p' and 'cells'");
  DiscreteJoint d;
  d.p = j.at("p").get<std::size_t>();
  for (const auto& c : j.at("cells")) {
    Cell cell;
    cell.x = c.at("x").get<std::vector<int>>();
    cell.prob = parse_rational(c.at("prob"), "prob");
    cell.pi = parse_rational(c.at("pi"), "pi");
    cell.mu0 = parse_rational(c.at("mu0"), "mu0");
    cell.mu1 = parse_rational(c.at("mu1"), "mu1");
    d.cells.push_back(std::move(cell));
  }
  d.validate();
  return d;
}

DiscreteJoint load_discrete_joint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_discrete_joint(ss.str());
}

std::vector<std::vector<int>> realizable_values(const DiscreteJoint& dist, const CoalitionMask& mask) {
  const auto members = mask.indices();
  std::set<std::vector<int>> out;
  for (const auto& c : dist.cells) {
    if (c.prob == 0) continue;
    std::vector<int> key;
    for (auto j : members) key.push_back(c.x[j]);
    out.insert(key);
  }
  return {out.begin(), out.end()};
}

Rational subgroup_mass(const DiscreteJoint& dist, const CoalitionMask& mask, const std::vector<int>& x_s) {
  const auto members = mask.indices();
  Rational mass;
  for (const auto& c : dist.cells) {
    if (matches(c, members, x_s)) mass += c.prob;
  }
  return mass;
}

Rational treated_mean(const DiscreteJoint& dist) {
  const auto m = moments(dist, CoalitionMask::empty(dist.p), {});
  return m.treated_y / m.pi;
}

Rational untreated_mean(const DiscreteJoint& dist) {
  const auto m = moments(dist, CoalitionMask::empty(dist.p), {});
  return m.control_y / m.control;
}

Rational population_bias(const DiscreteJoint& dist, const CoalitionMask& mask, const std::vector<int>& x_s) {
  const auto m = moments(dist, mask, x_s);
  const Rational delta = m.treated_y / m.pi - m.control_y / m.control;
  const Rational tau_s = (m.mu1 - m.mu0) / m.mass;
  return delta - tau_s;
}

Rational population_value(const DiscreteJoint& dist, const CoalitionMask& mask) {
  Rational v;
  for (const auto& x_s : realizable_values(dist, mask)) {
    v -= subgroup_mass(dist, mask, x_s) * population_bias(dist, mask, x_s);
  }
  return v;
}

std::map<CoalitionMask, Rational> population_game(const DiscreteJoint& dist) {
  if (dist.p > 20) throw Error(ErrorCode::DimensionTooLarge, "population game enumeration limited to p <= 20");
  std::map<CoalitionMask, Rational> out;
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << dist.p); ++b) {
    const auto mask = CoalitionMask::from_bits(dist.p, b);
    out.emplace(mask, population_value(dist, mask));
  }
  return out;
}

IdentitySides covariance_identity(const DiscreteJoint& dist, const CoalitionMask& mask, const std::vector<int>& x_s) {
  const auto m = moments(dist, mask, x_s);
  IdentitySides out;
  out.lhs = population_bias(dist, mask, x_s);
  out.e_s = m.pi / m.mass;
  if (out.e_s == 0 || out.e_s == 1) throw Error(ErrorCode::DegenerateArm, "e_S must lie strictly between 0 and 1");
  const Rational mean_mu0 = m.mu0 / m.mass, mean_mu1 = m.mu1 / m.mass;
  out.cov_mu1 = m.pi_mu1 / m.mass - out.e_s * mean_mu1;
  out.cov_mu0 = m.pi_mu0 / m.mass - out.e_s * mean_mu0;
  out.rhs = out.cov_mu1 / out.e_s + out.cov_mu0 / (1 - out.e_s);
  return out;
}

std::vector<Rational> brute_force_shapley(const std::map<CoalitionMask, Rational>& values, std::size_t p) {
  if (p > 12) throw Error(ErrorCode::DimensionTooLarge, "permutation enumeration limited to p <= 12");
  if (values.size() != (std::size_t{1} << p)) throw Error(ErrorCode::IncompleteTable, "value table must have 2^p entries");
  for (const auto& [mask, v] : values) {
    if (mask.width() != p) throw Error(ErrorCode::IncompleteTable, "value table mask width differs from p");
  }
  std::vector<Rational> phi(p);
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rational perms = 0;
  do {
    CoalitionMask prefix(p);
    Rational before = values.at(prefix);
    for (auto j : order) {
      prefix.set(j);
      const Rational& after = values.at(prefix);
      phi[j] += after - before;
      before = after;
    }
    perms += 1;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& v : phi) v /= perms;
  return phi;
}

}  // namespace confattr::oracle
