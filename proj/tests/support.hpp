#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "pfmlab/core/io.hpp"
#include "pfmlab/harness.hpp"
#include "pfmlab/lifelog_gen.hpp"
#include "pfmlab/taste_space.hpp"

namespace pfmlab::test {

inline std::filesystem::path data_dir() { return PFMLAB_TEST_DATA_DIR; }

inline const taste_dataset& dataset() {
  static const taste_dataset ds =
      harness::load_taste_dataset(data_dir() / "recipes.json", data_dir() / "molecules.csv");
  return ds;
}

inline const std::vector<lifestyle_profile>& profiles() {
  static const auto p = profiles_from_json(io::read_json(data_dir() / "profiles.json"));
  return p;
}

// Default five-person, 500-day stream; built once per test binary.
inline const event_stream& default_stream() {
  static const event_stream s = generate(profiles(), 500, dataset(), 42);
  return s;
}

inline event_stream person_stream(const event_stream& s, const std::string& person) {
  event_stream out;
  for (const auto& e : s.events)
    if (e.person_id == person) out.events.push_back(e);
  for (const auto& c : s.day_contexts)
    if (c.person_id == person) out.day_contexts.push_back(c);
  return out;
}

// The first default profile with every context effect reset to 1.
inline lifestyle_profile flat_profile(const std::string& id = "flat") {
  lifestyle_profile p = profiles().front();
  p.person_id = id;
  for (auto& e : p.effects) e = context_effect{};
  return p;
}

struct temp_dir {
  std::filesystem::path path;
  explicit temp_dir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("pfmlab_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~temp_dir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace pfmlab::test
