#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace wmlab {

// Every failure the library reports, as a stable code the caller can switch on.
enum class Errc {
  empty_corpus,
  empty_dataset,
  file_not_found,
  io_error,
  invalid_token_id,
  invalid_argument,
  degenerate_green_list,
  empty_support,
  empty_text,
  empty_reference,
  empty_input,
  empty_side,
  model_required,
  zero_entropy_text,
  insufficient_nulls,
  insufficient_negatives,
  cover_too_short,
  network_error,
  timeout_error,
  malformed_response,
  config_error,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::empty_corpus: return "empty_corpus";
    case Errc::empty_dataset: return "empty_dataset";
    case Errc::file_not_found: return "file_not_found";
    case Errc::io_error: return "io_error";
    case Errc::invalid_token_id: return "invalid_token_id";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::degenerate_green_list: return "degenerate_green_list";
    case Errc::empty_support: return "empty_support";
    case Errc::empty_text: return "empty_text";
    case Errc::empty_reference: return "empty_reference";
    case Errc::empty_input: return "empty_input";
    case Errc::empty_side: return "empty_side";
    case Errc::model_required: return "model_required";
    case Errc::zero_entropy_text: return "zero_entropy_text";
    case Errc::insufficient_nulls: return "insufficient_nulls";
    case Errc::insufficient_negatives: return "insufficient_negatives";
    case Errc::cover_too_short: return "cover_too_short";
    case Errc::network_error: return "network_error";
    case Errc::timeout_error: return "timeout_error";
    case Errc::malformed_response: return "malformed_response";
    case Errc::config_error: return "config_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace wmlab
