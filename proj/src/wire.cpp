#include "collab/wire.hpp"

#include <cstring>

namespace collab {

void ByteWriter::u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
}

void ByteWriter::u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
}

void ByteWriter::raw(std::span<const uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
}

void ByteWriter::pose(const RigidTransform& t) {
    for (double c : t.coeffs()) f64(c);
}

uint16_t ByteReader::u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_]) | (static_cast<uint16_t>(data_[pos_ + 1]) << 8);
    pos_ += 2;
    return v;
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

uint64_t ByteReader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

double ByteReader::f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

std::span<const uint8_t> ByteReader::raw(size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

RigidTransform ByteReader::pose() {
    std::array<double, 7> c;
    for (double& v : c) v = f64();
    return RigidTransform::from_coeffs(c);
}

// ---------------------------------------------------------------------------
// Framing
// ---------------------------------------------------------------------------

void send_message(Transport& transport, MessageType type, std::span<const uint8_t> body) {
    ByteWriter w;
    w.raw(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(kWireMagic), 4));
    w.u16(kWireVersion);
    w.u16(static_cast<uint16_t>(type));
    w.u64(body.size());
    w.raw(body);
    transport.send(w.bytes());
}

namespace {

bool recv_exact(Transport& transport, uint8_t* buf, size_t n, bool allow_eof_at_start,
                size_t base_offset) {
    size_t got = 0;
    while (got < n) {
        const size_t r = transport.recv_some(buf + got, n - got);
        if (r == 0) {
            if (got == 0 && allow_eof_at_start) return false;
            throw DecodeError("stream ended mid-message", base_offset + got);
        }
        got += r;
    }
    return true;
}

}  // namespace

std::optional<WireMessage> recv_message(Transport& transport) {
    uint8_t header[kFrameHeaderSize];
    if (!recv_exact(transport, header, kFrameHeaderSize, true, 0)) return std::nullopt;

    ByteReader r(std::span<const uint8_t>(header, kFrameHeaderSize));
    if (std::memcmp(header, kWireMagic, 4) != 0) throw DecodeError("bad magic", 0);
    r.raw(4);
    const uint16_t version = r.u16();
    if (version != kWireVersion) throw DecodeError("unsupported version", 4);
    const uint16_t type = r.u16();
    if (type < 1 || type > 5) throw DecodeError("unknown message type", 6);
    const uint64_t body_len = r.u64();
    if (body_len > (1ull << 32)) throw DecodeError("implausible body length", 8);

    WireMessage msg;
    msg.type = static_cast<MessageType>(type);
    msg.body.resize(body_len);
    if (body_len > 0)
        recv_exact(transport, msg.body.data(), body_len, false, kFrameHeaderSize);
    return msg;
}

void MemPipe::write(std::span<const uint8_t> data) {
    std::unique_lock lock(mutex_);
    if (closed_) throw std::runtime_error("write to closed pipe");
    buf_.insert(buf_.end(), data.begin(), data.end());
    data_available_.notify_all();
}

size_t MemPipe::read_some(uint8_t* out, size_t max) {
    std::unique_lock lock(mutex_);
    data_available_.wait(lock, [&] { return read_pos_ < buf_.size() || closed_; });
    if (read_pos_ >= buf_.size()) return 0;
    const size_t n = std::min(max, buf_.size() - read_pos_);
    std::memcpy(out, buf_.data() + read_pos_, n);
    read_pos_ += n;
    return n;
}

void MemPipe::close_write() {
    std::unique_lock lock(mutex_);
    closed_ = true;
    data_available_.notify_all();
}

// ---------------------------------------------------------------------------
// Payloads
// ---------------------------------------------------------------------------

std::vector<uint8_t> encode_frame(const FrameMessage& frame, int jpeg_quality) {
    const std::vector<uint8_t> depth_png = encode_depth_png(frame.depth);
    const std::vector<uint8_t> color_jpeg =
        frame.color.rgb.empty() ? std::vector<uint8_t>{} : encode_color_jpeg(frame.color, jpeg_quality);

    ByteWriter w;
    w.u64(frame.frame_index);
    w.pose(frame.local_pose);
    w.u32(static_cast<uint32_t>(depth_png.size()));
    w.u32(static_cast<uint32_t>(color_jpeg.size()));
    w.raw(depth_png);
    w.raw(color_jpeg);
    return std::move(w.bytes());
}

FrameMessage decode_frame(std::span<const uint8_t> body) {
    ByteReader r(body);
    FrameMessage msg;
    msg.frame_index = r.u64();
    msg.local_pose = r.pose();
    const uint32_t depth_len = r.u32();
    const uint32_t color_len = r.u32();
    if (depth_len + static_cast<uint64_t>(color_len) != r.remaining())
        throw DecodeError("payload length mismatch", r.offset());

    const auto depth_bytes = r.raw(depth_len);
    try {
        msg.depth = decode_depth_png(std::vector<uint8_t>(depth_bytes.begin(), depth_bytes.end()));
    } catch (const std::exception& e) {
        throw DecodeError(std::string("depth payload: ") + e.what(), r.offset() - depth_len);
    }
    if (color_len > 0) {
        const auto color_bytes = r.raw(color_len);
        try {
            msg.color = decode_color_jpeg(std::vector<uint8_t>(color_bytes.begin(), color_bytes.end()));
        } catch (const std::exception& e) {
            throw DecodeError(std::string("colour payload: ") + e.what(), r.offset() - color_len);
        }
    } else {
        msg.color = ColorImage();
    }
    return msg;
}

namespace {

void write_intrinsics(ByteWriter& w, const CameraIntrinsics& k) {
    w.f64(k.fx);
    w.f64(k.fy);
    w.f64(k.cx);
    w.f64(k.cy);
    w.u32(static_cast<uint32_t>(k.width));
    w.u32(static_cast<uint32_t>(k.height));
}

CameraIntrinsics read_intrinsics(ByteReader& r) {
    CameraIntrinsics k;
    k.fx = r.f64();
    k.fy = r.f64();
    k.cx = r.f64();
    k.cy = r.f64();
    k.width = static_cast<int>(r.u32());
    k.height = static_cast<int>(r.u32());
    return k;
}

}  // namespace

std::vector<uint8_t> encode_hello(const HelloMessage& hello) {
    ByteWriter w;
    write_intrinsics(w, hello.depth_intrinsics);
    write_intrinsics(w, hello.color_intrinsics);
    return std::move(w.bytes());
}

HelloMessage decode_hello(std::span<const uint8_t> body) {
    ByteReader r(body);
    HelloMessage h;
    h.depth_intrinsics = read_intrinsics(r);
    h.color_intrinsics = read_intrinsics(r);
    if (!h.depth_intrinsics.valid() || !h.color_intrinsics.valid())
        throw DecodeError("invalid intrinsics", 0);
    return h;
}

std::vector<uint8_t> encode_render_request(const RigidTransform& pose) {
    ByteWriter w;
    w.pose(pose);
    return std::move(w.bytes());
}

RigidTransform decode_render_request(std::span<const uint8_t> body) {
    ByteReader r(body);
    return r.pose();
}

std::vector<uint8_t> encode_rendered_image(const ColorImage& image, int jpeg_quality) {
    const auto jpeg = encode_color_jpeg(image, jpeg_quality);
    ByteWriter w;
    w.u32(static_cast<uint32_t>(image.width));
    w.u32(static_cast<uint32_t>(image.height));
    w.u32(static_cast<uint32_t>(jpeg.size()));
    w.raw(jpeg);
    return std::move(w.bytes());
}

RenderedImageMessage decode_rendered_image(std::span<const uint8_t> body) {
    ByteReader r(body);
    RenderedImageMessage msg;
    msg.width = static_cast<int>(r.u32());
    msg.height = static_cast<int>(r.u32());
    const uint32_t len = r.u32();
    const auto bytes = r.raw(len);
    msg.jpeg.assign(bytes.begin(), bytes.end());
    return msg;
}

}  // namespace collab
