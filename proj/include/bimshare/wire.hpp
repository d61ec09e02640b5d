#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <json.hpp>

namespace bimshare {

// The closed set of control- and data-plane message kinds.
enum class MsgKind {
    RegisterParty,
    RegisterShared,
    Locate,
    Authorize,
    TransferOwner,
    PropagateNotify,
    Replicate,
    FetchEntities,
    Ack,
    Error,
};

const char* to_string(MsgKind k);
MsgKind msg_kind_from_string(const std::string& s); // throws ProtocolError

// Error codes carried in the body of an Error message.
namespace errc {
inline constexpr const char* UNKNOWN_KIND = "UNKNOWN_KIND";
inline constexpr const char* AUTH_DENIED = "AUTH_DENIED";
inline constexpr const char* NOT_OWNER = "NOT_OWNER";
inline constexpr const char* STALE_VERSION = "STALE_VERSION";
inline constexpr const char* NOT_FOUND = "NOT_FOUND";
inline constexpr const char* OWNERSHIP_CLASH = "OWNERSHIP_CLASH";
inline constexpr const char* BAD_PAYLOAD = "BAD_PAYLOAD";
} // namespace errc

struct Message {
    MsgKind kind = MsgKind::Ack;
    std::uint64_t id = 0;   // request/response correlation
    std::string from;       // sender party name, or "controller"
    nlohmann::json body = nlohmann::json::object();
};

Message make_ack(const Message& req, nlohmann::json body = nlohmann::json::object());
Message make_error(const Message& req, const std::string& code, const std::string& detail);

// A frame is a 4-byte big-endian payload length followed by the UTF-8 JSON
// object {"kind","id","from","body"}. Frames above 64 MiB are rejected.
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

std::string encode_frame(const Message& msg);

// Parses the JSON payload of one frame (without the length prefix).
Message decode_payload(const std::string& payload);

// Incremental frame assembly for stream transports. Feed bytes as they
// arrive; complete messages are handed to the sink.
class FrameDecoder {
public:
    using Sink = std::function<void(Message&&)>;

    // Throws ProtocolError on an oversized frame or malformed payload.
    void feed(const char* data, std::size_t len, const Sink& sink);

private:
    std::string buf_;
};

// Synchronous request/response transport used by the control plane.
class Channel {
public:
    virtual ~Channel() = default;
    virtual Message request(const Message& msg) = 0;
};

// In-process channel: requests go straight to a handler function.
class LocalChannel final : public Channel {
public:
    using Handler = std::function<Message(const Message&)>;
    explicit LocalChannel(Handler h) : handler_(std::move(h)) {}
    Message request(const Message& msg) override { return handler_(msg); }

private:
    Handler handler_;
};

// Raises ProtocolError/AuthError/NotFoundError/ConflictError matching the
// error code of an Error reply; passes other replies through.
Message expect_ok(Message reply);

} // namespace bimshare
