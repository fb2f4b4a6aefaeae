#pragma once

#include <stdexcept>
#include <string>

namespace beex {

// Bad shapes, non-scalar backward roots, missing grads.
struct contract_error : std::logic_error {
    explicit contract_error(const std::string& msg) : std::logic_error(msg) {}
};

// Bad CLI flags, malformed config files, impossible hyperparameters.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed TSV rows, labels out of range, corrupt checkpoints.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace beex
