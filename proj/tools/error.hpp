#ifndef CODETUNE_TOOLS_ERROR_HPP
#define CODETUNE_TOOLS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace codetune::cli {

/// Command-level failure with a machine-parsable class; main prints it as
/// `error:<cls>: <message>` on a single stderr line and exits nonzero.
class CliError : public std::runtime_error {
 public:
  CliError(std::string cls, const std::string& message)
      : std::runtime_error(message), cls_(std::move(cls)) {}
  const std::string& cls() const { return cls_; }

 private:
  std::string cls_;
};

}  // namespace codetune::cli

#endif
