#include "bimshare/wire.hpp"

#include "bimshare/errors.hpp"

#include <array>

namespace bimshare {

namespace {

constexpr std::array<const char*, 10> kKindNames = {
    "RegisterParty", "RegisterShared", "Locate",        "Authorize",    "TransferOwner",
    "PropagateNotify", "Replicate",    "FetchEntities", "Ack",          "Error",
};

} // namespace

const char* to_string(MsgKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

MsgKind msg_kind_from_string(const std::string& s) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (s == kKindNames[i]) return static_cast<MsgKind>(i);
    throw ProtocolError(errc::UNKNOWN_KIND, "unknown message kind '" + s + "'");
}

Message make_ack(const Message& req, nlohmann::json body) {
    return Message{MsgKind::Ack, req.id, "controller", std::move(body)};
}

Message make_error(const Message& req, const std::string& code, const std::string& detail) {
    return Message{MsgKind::Error, req.id, "controller",
                   nlohmann::json{{"code", code}, {"detail", detail}}};
}

std::string encode_frame(const Message& msg) {
    nlohmann::json j{
        {"kind", to_string(msg.kind)}, {"id", msg.id}, {"from", msg.from}, {"body", msg.body}};
    std::string payload = j.dump();
    if (payload.size() > kMaxFrameBytes)
        throw ProtocolError(errc::BAD_PAYLOAD, "frame exceeds 64 MiB");
    std::uint32_t n = static_cast<std::uint32_t>(payload.size());
    std::string out;
    out.reserve(payload.size() + 4);
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out += payload;
    return out;
}

Message decode_payload(const std::string& payload) {
    nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("kind") || !j.contains("id") ||
        !j.contains("from") || !j.contains("body") || !j["kind"].is_string() ||
        !j["id"].is_number_unsigned() || !j["from"].is_string())
        throw ProtocolError(errc::BAD_PAYLOAD, "malformed message payload");
    Message m;
    m.kind = msg_kind_from_string(j["kind"].get<std::string>());
    m.id = j["id"].get<std::uint64_t>();
    m.from = j["from"].get<std::string>();
    m.body = j["body"];
    return m;
}

void FrameDecoder::feed(const char* data, std::size_t len, const Sink& sink) {
    buf_.append(data, len);
    for (;;) {
        if (buf_.size() < 4) return;
        auto b = [&](std::size_t i) { return static_cast<std::uint32_t>(
            static_cast<unsigned char>(buf_[i])); };
        std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
        if (n > kMaxFrameBytes)
            throw ProtocolError(errc::BAD_PAYLOAD, "frame exceeds 64 MiB");
        if (buf_.size() < 4u + n) return;
        Message m = decode_payload(buf_.substr(4, n));
        buf_.erase(0, 4u + n);
        sink(std::move(m));
    }
}

Message expect_ok(Message reply) {
    if (reply.kind != MsgKind::Error) return reply;
    std::string code = reply.body.value("code", std::string{});
    std::string detail = reply.body.value("detail", std::string{});
    if (code == errc::AUTH_DENIED || code == errc::NOT_OWNER) throw AuthError(detail);
    if (code == errc::NOT_FOUND) throw NotFoundError(detail);
    if (code == errc::STALE_VERSION || code == errc::OWNERSHIP_CLASH)
        throw ConflictError(detail);
    throw ProtocolError(code, detail);
}

} // namespace bimshare
