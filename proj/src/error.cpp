#include "duetsep/error.hpp"

namespace duetsep {

void fail(const std::string& what) { throw Error(what); }

void fail_argument(const std::string& what) { throw InvalidArgument(what); }

}  // namespace duetsep
