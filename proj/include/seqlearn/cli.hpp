#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seqlearn {

// args excludes the program name. Failures print one "error: <class>: message"
// line on `err` and return the matching exit code.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, const char* const* argv);

} // namespace seqlearn
