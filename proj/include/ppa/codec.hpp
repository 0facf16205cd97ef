#pragma once

// Wire format.
//
// A frame is a 4-byte big-endian payload length followed by a canonical text
// document: one `key=value` line per field, keys sorted bytewise, each line
// terminated by '\n'. Every document carries `msg_type`, `tag` and
// `protocol_version`. Big integers are lowercase hex, lists are comma-joined,
// reals are the lowercase hex of their IEEE-754 bit pattern, and string
// values escape '\\' and '\n'.

#include "ppa/protocol.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace ppa::codec {

inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::size_t kDefaultMaxFrame = 64u * 1024u * 1024u;

enum class MsgType {
    client_request,
    client_response,
    update,
    aggregation_request,
    aggregation_result,
    notification,
    error,
};

std::string to_string(MsgType t);
MsgType msg_type_from_string(std::string_view s);

class CodecError : public Error {
public:
    using Error::Error;
};

struct Envelope {
    MsgType type = MsgType::error;
    std::uint64_t tag = 0;
    std::uint32_t protocol_version = kProtocolVersion;
    std::map<std::string, std::string> fields; // payload only

    friend bool operator==(const Envelope&, const Envelope&) = default;
};

/// Canonical text body without the length prefix.
std::string render(const Envelope& env);
Envelope parse(std::string_view body);

std::string frame_encode(const Envelope& env, std::size_t max_frame = kDefaultMaxFrame);

/// Decodes exactly one frame; `bytes` must hold nothing else.
Envelope frame_decode(std::string_view bytes, std::size_t max_frame = kDefaultMaxFrame);

/// Payload length declared by a 4-byte header. Throws if above `max_frame`.
std::uint32_t frame_length(std::string_view header, std::size_t max_frame = kDefaultMaxFrame);

Envelope to_envelope(const protocol::Message& msg);
protocol::Message from_envelope(const Envelope& env);

inline std::string encode_message(const protocol::Message& msg) { return frame_encode(to_envelope(msg)); }
inline protocol::Message decode_message(std::string_view frame) { return from_envelope(frame_decode(frame)); }

} // namespace ppa::codec
