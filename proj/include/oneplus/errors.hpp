#pragma once

#include <stdexcept>
#include <string>

namespace oneplus {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Packet bytes cannot be parsed into a supported header stack.
struct MalformedPacket : Error {
    using Error::Error;
};

// A field value is outside its on-wire range (e.g. CID >= 2^24).
struct RangeError : Error {
    using Error::Error;
};

// A decapsulation was requested on a packet whose stack does not carry that layer.
struct WrongLayer : Error {
    using Error::Error;
};

// Encapsulation requested on a packet that already carries a protection header.
struct AlreadyProtected : Error {
    using Error::Error;
};

// Sequence-window parameters violate the mode's precondition (e.g. W != N/2).
struct ParamError : Error {
    using Error::Error;
};

// Config/scenario document is syntactically or structurally invalid.
// what() contains the offending field path.
struct ParseError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

// An install would duplicate an existing table entry.
struct ConflictError : Error {
    using Error::Error;
};

}  // namespace oneplus
