// Copyright 2026 The qmal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qmal {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kValidationTol = 1e-9;
inline constexpr double kIdentityTol = 1e-12;
inline constexpr double kImpossibleHerald = 1e-12;

enum class ErrorCode {
  NonHermitian,
  NotPSD,
  BadDiagonal,
  OverUnitOverlap,
  NonSquare,
  NumericalBreakdown,
  SizeMismatch,
  EmptyAllowedSet,
  DimensionOverflow,
  NotInBasis,
  BasisMismatch,
  RefNotPure,
  OutOfRangeExpectation,
  UnweightedPattern,
  ZeroProbabilityMass,
  BadModes,
  NonUnitaryCustom,
  BasisTooSmall,
  HeraldImpossible,
  InvalidIR,
  SyntaxError,
  SemanticError,
  DenseCapExceeded,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonHermitian: return "NonHermitian";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::BadDiagonal: return "BadDiagonal";
    case ErrorCode::OverUnitOverlap: return "OverUnitOverlap";
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::EmptyAllowedSet: return "EmptyAllowedSet";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::NotInBasis: return "NotInBasis";
    case ErrorCode::BasisMismatch: return "BasisMismatch";
    case ErrorCode::RefNotPure: return "RefNotPure";
    case ErrorCode::OutOfRangeExpectation: return "OutOfRangeExpectation";
    case ErrorCode::UnweightedPattern: return "UnweightedPattern";
    case ErrorCode::ZeroProbabilityMass: return "ZeroProbabilityMass";
    case ErrorCode::BadModes: return "BadModes";
    case ErrorCode::NonUnitaryCustom: return "NonUnitaryCustom";
    case ErrorCode::BasisTooSmall: return "BasisTooSmall";
    case ErrorCode::HeraldImpossible: return "HeraldImpossible";
    case ErrorCode::InvalidIR: return "InvalidIR";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SemanticError: return "SemanticError";
    case ErrorCode::DenseCapExceeded: return "DenseCapExceeded";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace qmal
