#include "ppa/codec.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <type_traits>

namespace ppa::codec {

using namespace ppa::protocol;

namespace {

constexpr std::string_view kReservedKeys[] = {"msg_type", "protocol_version", "tag"};

bool is_reserved(std::string_view key)
{
    for (auto k : kReservedKeys) {
        if (k == key) {
            return true;
        }
    }
    return false;
}

bool valid_key(std::string_view key)
{
    if (key.empty()) {
        return false;
    }
    for (char c : key) {
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) {
            return false;
        }
    }
    return true;
}

std::string escape(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\\') {
            out += "\\\\";
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string unescape(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out.push_back(s[i]);
            continue;
        }
        if (i + 1 >= s.size()) {
            throw CodecError("codec: dangling escape");
        }
        char next = s[++i];
        if (next == '\\') {
            out.push_back('\\');
        } else if (next == 'n') {
            out.push_back('\n');
        } else {
            throw CodecError("codec: unknown escape sequence");
        }
    }
    return out;
}

template <typename Int>
Int parse_decimal(std::string_view s, std::string_view what)
{
    static_assert(std::is_unsigned_v<Int>);
    Int value{};
    bool leading_zero = s.size() > 1 && s.front() == '0';
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || leading_zero || ec != std::errc() || ptr != s.data() + s.size()) {
        throw CodecError("codec: malformed decimal field '" + std::string(what) + "'");
    }
    return value;
}

BigInt parse_hex(std::string_view s, std::string_view what)
{
    if (s.empty() || (s.size() > 1 && s.front() == '0')) {
        throw CodecError("codec: malformed hex field '" + std::string(what) + "'");
    }
    try {
        return from_hex(s);
    } catch (const Error&) {
        throw CodecError("codec: malformed hex field '" + std::string(what) + "'");
    }
}

std::vector<std::string_view> split_list(std::string_view s)
{
    std::vector<std::string_view> out;
    if (s.empty()) {
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        auto comma = s.find(',', start);
        out.push_back(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& render_one)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out.push_back(',');
        }
        out += render_one(items[i]);
    }
    return out;
}

std::string double_to_hex(double v)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    auto bits = std::bit_cast<std::uint64_t>(v);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kDigits[bits & 0xf];
        bits >>= 4;
    }
    return out;
}

double double_from_hex(std::string_view s)
{
    if (s.size() != 16) {
        throw CodecError("codec: real values must be 16 hex digits");
    }
    std::uint64_t bits = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') {
            d = c - '0';
        } else if (c >= 'a' && c <= 'f') {
            d = c - 'a' + 10;
        } else {
            throw CodecError("codec: malformed real value");
        }
        bits = (bits << 4) | static_cast<std::uint64_t>(d);
    }
    return std::bit_cast<double>(bits);
}

// Field accessors over a decoded envelope.
class Reader {
public:
    explicit Reader(const Envelope& env) : env_(env) {}

    const std::string& str(const std::string& key) const
    {
        auto it = env_.fields.find(key);
        if (it == env_.fields.end()) {
            throw CodecError("codec: missing field '" + key + "' in " + to_string(env_.type));
        }
        return it->second;
    }
    bool has(const std::string& key) const { return env_.fields.count(key) > 0; }
    std::uint64_t u64(const std::string& key) const { return parse_decimal<std::uint64_t>(str(key), key); }
    BigInt hex(const std::string& key) const { return parse_hex(str(key), key); }

    paillier::PublicKey public_key() const
    {
        BigInt n = hex("public_key_n");
        BigInt g = hex("public_key_g");
        if (n < 2 || g != n + 1) {
            throw CodecError("codec: public key must use g = n + 1");
        }
        return paillier::PublicKey::from_modulus(n);
    }

    std::vector<Ciphertext> ciphertexts(const std::string& key) const
    {
        const std::string& fp = str("key_fingerprint");
        std::vector<Ciphertext> out;
        for (auto item : split_list(str(key))) {
            out.push_back(Ciphertext{parse_hex(item, key), fp});
        }
        if (out.empty() != fp.empty()) {
            throw CodecError("codec: key_fingerprint must be present exactly when ciphertexts are");
        }
        return out;
    }

    Share share() const
    {
        return Share{u64("share_index"), hex("share_value"), u64("share_tag")};
    }

    void expect_fields(std::initializer_list<std::string_view> keys) const
    {
        for (const auto& [k, v] : env_.fields) {
            bool known = false;
            for (auto allowed : keys) {
                known = known || allowed == k;
            }
            if (!known) {
                throw CodecError("codec: unexpected field '" + k + "' in " + to_string(env_.type));
            }
        }
    }

private:
    const Envelope& env_;
};

std::string fingerprint_of_list(const std::vector<Ciphertext>& cs)
{
    if (cs.empty()) {
        return {};
    }
    for (const auto& c : cs) {
        if (c.key_fingerprint != cs.front().key_fingerprint) {
            throw CodecError("codec: ciphertexts in one message must share a key");
        }
    }
    return cs.front().key_fingerprint;
}

std::string render_ciphertexts(const std::vector<Ciphertext>& cs)
{
    return join(cs, [](const Ciphertext& c) { return to_hex(c.value); });
}

void put_share(Envelope& env, const Share& s)
{
    env.fields["share_index"] = std::to_string(s.index);
    env.fields["share_tag"] = std::to_string(s.tag);
    env.fields["share_value"] = to_hex(s.value);
}

void put_public_key(Envelope& env, const paillier::PublicKey& pk)
{
    env.fields["public_key_g"] = to_hex(pk.g);
    env.fields["public_key_n"] = to_hex(pk.n);
}

} // namespace

std::string to_string(MsgType t)
{
    switch (t) {
    case MsgType::client_request:
        return "client_request";
    case MsgType::client_response:
        return "client_response";
    case MsgType::update:
        return "update";
    case MsgType::aggregation_request:
        return "aggregation_request";
    case MsgType::aggregation_result:
        return "aggregation_result";
    case MsgType::notification:
        return "notification";
    case MsgType::error:
        return "error";
    }
    return "unknown";
}

MsgType msg_type_from_string(std::string_view s)
{
    for (auto t : {MsgType::client_request, MsgType::client_response, MsgType::update, MsgType::aggregation_request,
                   MsgType::aggregation_result, MsgType::notification, MsgType::error}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    throw CodecError("codec: unknown msg_type '" + std::string(s) + "'");
}

std::string render(const Envelope& env)
{
    std::map<std::string, std::string> all;
    for (const auto& [k, v] : env.fields) {
        if (!valid_key(k) || is_reserved(k)) {
            throw CodecError("codec: invalid payload key '" + k + "'");
        }
        all.emplace(k, escape(v));
    }
    all["msg_type"] = to_string(env.type);
    all["protocol_version"] = std::to_string(env.protocol_version);
    all["tag"] = std::to_string(env.tag);

    std::string out;
    for (const auto& [k, v] : all) {
        out += k;
        out.push_back('=');
        out += v;
        out.push_back('\n');
    }
    return out;
}

Envelope parse(std::string_view body)
{
    Envelope env;
    std::string previous;
    bool have_type = false;
    bool have_tag = false;
    bool have_version = false;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto nl = body.find('\n', pos);
        if (nl == std::string_view::npos) {
            throw CodecError("codec: unterminated line");
        }
        std::string_view line = body.substr(pos, nl - pos);
        pos = nl + 1;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw CodecError("codec: line without '='");
        }
        std::string key(line.substr(0, eq));
        std::string_view raw = line.substr(eq + 1);
        if (!valid_key(key)) {
            throw CodecError("codec: invalid key '" + key + "'");
        }
        if (!previous.empty() && key <= previous) {
            throw CodecError("codec: keys not in canonical order at '" + key + "'");
        }
        previous = key;

        if (key == "msg_type") {
            env.type = msg_type_from_string(raw);
            have_type = true;
        } else if (key == "tag") {
            env.tag = parse_decimal<std::uint64_t>(raw, key);
            have_tag = true;
        } else if (key == "protocol_version") {
            env.protocol_version = parse_decimal<std::uint32_t>(raw, key);
            have_version = true;
        } else {
            env.fields.emplace(std::move(key), unescape(raw));
        }
    }
    if (!have_type || !have_tag || !have_version) {
        throw CodecError("codec: msg_type, tag and protocol_version are required");
    }
    if (env.protocol_version != kProtocolVersion) {
        throw CodecError("codec: unsupported protocol_version " + std::to_string(env.protocol_version));
    }
    return env;
}

std::string frame_encode(const Envelope& env, std::size_t max_frame)
{
    std::string body = render(env);
    if (body.size() > max_frame || body.size() > 0xffffffffu) {
        throw CodecError("codec: frame of " + std::to_string(body.size()) + " bytes exceeds the maximum");
    }
    auto len = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    out.push_back(static_cast<char>((len >> 24) & 0xff));
    out.push_back(static_cast<char>((len >> 16) & 0xff));
    out.push_back(static_cast<char>((len >> 8) & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
    out += body;
    return out;
}

std::uint32_t frame_length(std::string_view header, std::size_t max_frame)
{
    if (header.size() < 4) {
        throw CodecError("codec: truncated frame header");
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) {
        len = (len << 8) | static_cast<std::uint8_t>(header[static_cast<std::size_t>(i)]);
    }
    if (len > max_frame) {
        throw CodecError("codec: declared frame length " + std::to_string(len) + " exceeds maximum "
                         + std::to_string(max_frame));
    }
    return len;
}

Envelope frame_decode(std::string_view bytes, std::size_t max_frame)
{
    std::uint32_t len = frame_length(bytes, max_frame);
    if (bytes.size() - 4 < len) {
        throw CodecError("codec: truncated frame");
    }
    if (bytes.size() - 4 > len) {
        throw CodecError("codec: trailing bytes after frame");
    }
    return parse(bytes.substr(4));
}

Envelope to_envelope(const Message& msg)
{
    Envelope env;
    std::visit(
        [&env](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ClientRequest>) {
                env.type = MsgType::client_request;
                env.fields["client_id"] = m.client_id;
            } else if constexpr (std::is_same_v<T, ClientResponse>) {
                env.type = MsgType::client_response;
                env.tag = m.tag.version;
                put_public_key(env, m.public_key);
                put_share(env, m.share);
                env.fields["global_model"] = join(m.global_model, double_to_hex);
                env.fields["threshold"] = std::to_string(m.threshold);
            } else if constexpr (std::is_same_v<T, Update>) {
                env.type = MsgType::update;
                env.tag = m.tag.version;
                env.fields["client_id"] = m.client_id;
                env.fields["count"] = std::to_string(m.count);
                env.fields["key_fingerprint"] = fingerprint_of_list(m.ciphertexts);
                env.fields["ciphertexts"] = render_ciphertexts(m.ciphertexts);
                put_share(env, m.share);
            } else if constexpr (std::is_same_v<T, AggregationRequest>) {
                env.type = MsgType::aggregation_request;
                env.tag = m.tag.version;
                env.fields["key_fingerprint"] = fingerprint_of_list(m.aggregate);
                env.fields["aggregate"] = render_ciphertexts(m.aggregate);
                env.fields["share_indices"] = join(m.shares, [](const Share& s) { return std::to_string(s.index); });
                env.fields["share_tags"] = join(m.shares, [](const Share& s) { return std::to_string(s.tag); });
                env.fields["share_values"] = join(m.shares, [](const Share& s) { return to_hex(s.value); });
            } else if constexpr (std::is_same_v<T, AggregationResult>) {
                env.type = MsgType::aggregation_result;
                env.tag = m.tag.version;
                env.fields["accepted"] = m.accepted ? "1" : "0";
                env.fields["reason"] = to_string(m.reason);
                env.fields["current_tag"] = std::to_string(m.current_tag.version);
            } else if constexpr (std::is_same_v<T, Notification>) {
                env.type = MsgType::notification;
                env.tag = m.tag.version;
                env.fields["kind"] = to_string(m.kind);
                env.fields["reason"] = to_string(m.reason);
                env.fields["threshold"] = std::to_string(m.threshold);
                if (m.public_key) {
                    put_public_key(env, *m.public_key);
                }
            } else if constexpr (std::is_same_v<T, ErrorMessage>) {
                env.type = MsgType::error;
                env.fields["code"] = m.code;
                env.fields["message"] = m.message;
            }
        },
        msg);
    return env;
}

Message from_envelope(const Envelope& env)
{
    Reader r(env);
    const Tag tag{env.tag};
    try {
        switch (env.type) {
        case MsgType::client_request:
            r.expect_fields({"client_id"});
            return ClientRequest{r.str("client_id")};
        case MsgType::client_response: {
            r.expect_fields({"global_model", "public_key_g", "public_key_n", "share_index", "share_tag",
                             "share_value", "threshold"});
            ClientResponse m;
            m.tag = tag;
            m.public_key = r.public_key();
            m.share = r.share();
            for (auto item : split_list(r.str("global_model"))) {
                m.global_model.push_back(double_from_hex(item));
            }
            m.threshold = r.u64("threshold");
            return m;
        }
        case MsgType::update: {
            r.expect_fields({"ciphertexts", "client_id", "count", "key_fingerprint", "share_index", "share_tag",
                             "share_value"});
            Update m;
            m.tag = tag;
            m.client_id = r.str("client_id");
            m.count = r.u64("count");
            m.ciphertexts = r.ciphertexts("ciphertexts");
            m.share = r.share();
            return m;
        }
        case MsgType::aggregation_request: {
            r.expect_fields({"aggregate", "key_fingerprint", "share_indices", "share_tags", "share_values"});
            AggregationRequest m;
            m.tag = tag;
            m.aggregate = r.ciphertexts("aggregate");
            auto indices = split_list(r.str("share_indices"));
            auto tags = split_list(r.str("share_tags"));
            auto values = split_list(r.str("share_values"));
            if (indices.size() != tags.size() || indices.size() != values.size()) {
                throw CodecError("codec: share lists differ in length");
            }
            for (std::size_t i = 0; i < indices.size(); ++i) {
                m.shares.push_back(Share{parse_decimal<std::uint64_t>(indices[i], "share_indices"),
                                         parse_hex(values[i], "share_values"),
                                         parse_decimal<std::uint64_t>(tags[i], "share_tags")});
            }
            return m;
        }
        case MsgType::aggregation_result: {
            r.expect_fields({"accepted", "current_tag", "reason"});
            const std::string& accepted = r.str("accepted");
            if (accepted != "0" && accepted != "1") {
                throw CodecError("codec: accepted must be 0 or 1");
            }
            return AggregationResult{tag, accepted == "1", rejection_from_string(r.str("reason")),
                                     Tag{r.u64("current_tag")}};
        }
        case MsgType::notification: {
            r.expect_fields({"kind", "public_key_g", "public_key_n", "reason", "threshold"});
            Notification m;
            m.kind = notification_kind_from_string(r.str("kind"));
            m.tag = tag;
            m.reason = rejection_from_string(r.str("reason"));
            m.threshold = r.u64("threshold");
            if (r.has("public_key_n") || r.has("public_key_g")) {
                m.public_key = r.public_key();
            }
            return m;
        }
        case MsgType::error:
            r.expect_fields({"code", "message"});
            return ErrorMessage{r.str("code"), r.str("message")};
        }
    } catch (const CodecError&) {
        throw;
    } catch (const Error& e) {
        throw CodecError(std::string("codec: ") + e.what());
    }
    throw CodecError("codec: unhandled msg_type");
}

} // namespace ppa::codec
