#pragma once

#include <filesystem>
#include <string>

#include "forge/canonical.hpp"
#include "forge/model.hpp"

namespace forge::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(FORGE_FIXTURES) / name;
}

inline std::string fixture_text(const std::string& name) {
    return read_file(fixture_path(name));
}

inline InstanceModel demo_brake() { return load_instance_model(fixture_text("demo_brake.json")); }
inline InstanceModel alloc_mini() { return load_instance_model(fixture_text("alloc_mini.json")); }

/// Fresh scratch directory under the build tree, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("forge_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace forge::testing
