#pragma once

#include <gmpxx.h>

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "confattr/mask.hpp"

namespace confattr::oracle {

using Rational = mpq_class;

struct Cell {
  std::vector<int> x;
  Rational prob;
  Rational pi;   // P(A = 1 | X = x)
  Rational mu0;  // E[Y(0) | X = x]
  Rational mu1;  // E[Y(1) | X = x]
};

/// Finite joint law of (X, A, Y(0), Y(1)) given cell by cell.
struct DiscreteJoint {
  std::size_t p = 0;
  std::vector<Cell> cells;

  /// Throws InvalidSpec unless probabilities sum to exactly one, every
  /// 0 < pi < 1, tuples have width p and are distinct.
  void validate() const;
};

/// Two binary covariates whose single-covariate adjustments leave bias while
/// the unadjusted and fully adjusted contrasts are both zero.
DiscreteJoint cancellation_example();

/// Parses {"p": .., "cells": [{"x": [..], "prob": "1/4", "pi": .., "mu0": .., "mu1": ..}]}.
DiscreteJoint load_discrete_joint(const std::filesystem::path& path);
DiscreteJoint parse_discrete_joint(const std::string& json_text);

/// Distinct realizable values of X_S (members in ascending index order).
std::vector<std::vector<int>> realizable_values(const DiscreteJoint& dist, const CoalitionMask& mask);

Rational subgroup_mass(const DiscreteJoint& dist, const CoalitionMask& mask, const std::vector<int>& x_s);
Rational treated_mean(const DiscreteJoint& dist);
Rational untreated_mean(const DiscreteJoint& dist);

/// b_S(x_S) = E[Y | A=1, x_S] - E[Y | A=0, x_S] - E[mu1 - mu0 | x_S].
Rational population_bias(const DiscreteJoint& dist, const CoalitionMask& mask, const std::vector<int>& x_s);
/// nu(S) = -sum_{x_S} P(x_S) b_S(x_S).
Rational population_value(const DiscreteJoint& dist, const CoalitionMask& mask);
/// nu(S) for every S, keyed by mask.
std::map<CoalitionMask, Rational> population_game(const DiscreteJoint& dist);

struct IdentitySides {
  Rational lhs;  // population_bias
  Rational rhs;  // Cov(pi, mu1 | x_S) / e_S + Cov(pi, mu0 | x_S) / (1 - e_S)
  Rational e_s;
  Rational cov_mu1;
  Rational cov_mu0;
};

IdentitySides covariance_identity(const DiscreteJoint& dist, const CoalitionMask& mask, const std::vector<int>& x_s);

/// Shapley values by averaging marginal contributions over all p!
/// orderings. Needs every one of the 2^p masks; p <= 12.
std::vector<Rational> brute_force_shapley(const std::map<CoalitionMask, Rational>& values, std::size_t p);

}  // namespace confattr::oracle
