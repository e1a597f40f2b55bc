#pragma once

#include <stdexcept>
#include <string>

namespace clbench {

// Error taxonomy mapped to CLI exit codes:
//   config_error -> 1, data_error (and subtypes) -> 2,
//   numeric_error -> 3, audit_error -> 4.

struct clb_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : clb_error {
    using clb_error::clb_error;
};

struct data_error : clb_error {
    using clb_error::clb_error;
};

struct bad_magic_error : data_error {
    using data_error::data_error;
};

struct truncated_error : data_error {
    using data_error::data_error;
};

struct count_mismatch_error : data_error {
    using data_error::data_error;
};

struct numeric_error : clb_error {
    using clb_error::clb_error;
};

struct audit_error : clb_error {
    using clb_error::clb_error;
};

} // namespace clbench
