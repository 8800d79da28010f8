// Copyright 2026 The GRAMC Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gramc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using LevelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Random stream used by every stochastic operation.
using Rng = std::mt19937_64;

// -----------------------------------------------------------------------------
// Errors
// -----------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (bad shape, range, address).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed input files, config values or program text.
class InputError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Numerical failures. These map to CLI exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotAnEigenvalue : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// -----------------------------------------------------------------------------
// Seeding
// -----------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for instance `index` of a run seeded with `seed`.
/// Serial and parallel batch runs derive identical streams from this.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(seed ^ splitmix64(index + 0x5851f42d4c957f2dULL)));
}

inline double standard_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace gramc
