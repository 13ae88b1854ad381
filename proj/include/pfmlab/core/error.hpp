#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pfmlab {

/// Failure categories raised across the library. Validation codes map to CLI
/// exit status 2, everything else to 1.
enum class errc {
  invalid_input,
  unknown_ingredient,
  duplicate_molecule,
  missing_ingredient_vector,
  structure_violation,
  invalid_profile,
  empty_candidate_set,
  empty_stream,
  missing_confounder,
  no_occurrences,
  no_training_data,
  insufficient_data,
  unknown_person,
  schema_violation,
  not_found,
  all_options_restricted,
  empty_options,
  duplicate_key,
  unknown_category,
  io_failure,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::invalid_input: return "InvalidInput";
    case errc::unknown_ingredient: return "UnknownIngredient";
    case errc::duplicate_molecule: return "DuplicateMolecule";
    case errc::missing_ingredient_vector: return "MissingIngredientVector";
    case errc::structure_violation: return "StructureViolation";
    case errc::invalid_profile: return "InvalidProfile";
    case errc::empty_candidate_set: return "EmptyCandidateSet";
    case errc::empty_stream: return "EmptyStream";
    case errc::missing_confounder: return "MissingConfounder";
    case errc::no_occurrences: return "NoOccurrences";
    case errc::no_training_data: return "NoTrainingData";
    case errc::insufficient_data: return "InsufficientData";
    case errc::unknown_person: return "UnknownPerson";
    case errc::schema_violation: return "SchemaViolation";
    case errc::not_found: return "NotFound";
    case errc::all_options_restricted: return "AllOptionsRestricted";
    case errc::empty_options: return "EmptyOptions";
    case errc::duplicate_key: return "DuplicateKey";
    case errc::unknown_category: return "UnknownCategory";
    case errc::io_failure: return "IoFailure";
  }
  return "Unknown";
}

constexpr bool is_validation(errc code) noexcept {
  switch (code) {
    case errc::io_failure:
    case errc::insufficient_data:
    case errc::no_training_data:
    case errc::all_options_restricted:
    case errc::no_occurrences:
      return false;
    default:
      return true;
  }
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace pfmlab
