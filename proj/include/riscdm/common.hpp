// SPDX-License-Identifier: Apache-2.0
//
// riscdm: conditional diffusion channel generation for double-RIS links
// Copyright (C) 2026 The riscdm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace riscdm {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// Error categories double as the CLI exit-code table.
enum class ErrorCode : int {
    invalid_argument = 1,
    invalid_config = 2,
    io = 3,
    geometry_mismatch = 4,
    corrupt_checkpoint = 5,
    not_psd = 6,
    numerical_overflow = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, const std::string &message,
                    ErrorCode code = ErrorCode::invalid_argument)
{
    if (!condition)
        throw Error(code, message);
}

} // namespace riscdm
