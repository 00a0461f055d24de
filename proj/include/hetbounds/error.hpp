#pragma once

#include <stdexcept>
#include <string>

namespace hb {

// All library failures carry the module that raised them so the CLI can
// report "module: cause" and exit nonzero.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}
  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

}  // namespace hb
