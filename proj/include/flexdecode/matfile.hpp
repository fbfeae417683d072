#pragma once

#include "flexdecode/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace flexdecode::io {

/// A top-level variable of a MAT v5 file. Only real 2-D numeric arrays carry
/// data; anything else is listed with a reason so lookups can fail clearly.
struct MatVariable {
    std::string name;
    Matrix data;
    std::string unsupported;  // empty when data is valid
};

/// Level-5 MAT reader: little-endian files, compressed or not, real 2-D
/// numeric arrays of any storage class. v7.3 (HDF5) files are rejected.
std::vector<MatVariable> read_mat_file(const std::filesystem::path& path);

/// Throws ValidationError naming the available variables when `name` is
/// missing or not a real 2-D numeric array.
const MatVariable& find_variable(const std::vector<MatVariable>& vars, const std::string& name);

}  // namespace flexdecode::io
