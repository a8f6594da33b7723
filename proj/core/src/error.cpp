#include "dtb/error.hpp"

namespace dtb {

std::string error_code(const Error& e) {
    if (dynamic_cast<const FormatError*>(&e)) return "format_error";
    if (dynamic_cast<const NotFoundError*>(&e)) return "not_found";
    if (dynamic_cast<const BoundsError*>(&e)) return "out_of_bounds";
    if (dynamic_cast<const DegenerateInputError*>(&e)) return "degenerate_input";
    if (dynamic_cast<const ShapeError*>(&e)) return "shape_mismatch";
    if (dynamic_cast<const SpecError*>(&e)) return "invalid_spec";
    if (dynamic_cast<const IoError*>(&e)) return "io_error";
    return "error";
}

}  // namespace dtb
