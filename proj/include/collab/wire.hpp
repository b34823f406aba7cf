#pragma once

#include "collab/codec.hpp"
#include "collab/image.hpp"
#include "collab/se3.hpp"

#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace collab {

/// Decode failure carrying the byte offset where the stream went wrong.
class DecodeError : public std::runtime_error {
public:
    DecodeError(const std::string& what, size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}
    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

// Little-endian scalar packing with bounds-checked reads.
class ByteWriter {
public:
    std::vector<uint8_t>& bytes() { return buf_; }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void f64(double v);
    void raw(std::span<const uint8_t> data);
    void pose(const RigidTransform& t);

private:
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    double f64();
    std::span<const uint8_t> raw(size_t n);
    RigidTransform pose();
    size_t offset() const { return pos_; }
    size_t remaining() const { return data_.size() - pos_; }

private:
    void need(size_t n) const {
        if (pos_ + n > data_.size()) throw DecodeError("message truncated", pos_);
    }
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Framed protocol
// ---------------------------------------------------------------------------

enum class MessageType : uint16_t {
    kHello = 1,
    kFrame = 2,
    kRenderRequest = 3,
    kRenderedImage = 4,
    kBye = 5,
};

inline constexpr uint16_t kWireVersion = 1;
inline constexpr char kWireMagic[4] = {'C', 'R', 'W', 'M'};
inline constexpr size_t kFrameHeaderSize = 16;  // magic + version + type + body length

/// Byte stream carrying the framed protocol. Implementations must deliver
/// bytes reliably and in order.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(std::span<const uint8_t> data) = 0;
    /// Returns 0 on end of stream.
    virtual size_t recv_some(uint8_t* buf, size_t max) = 0;
    virtual void close_send() = 0;
};

struct WireMessage {
    MessageType type;
    std::vector<uint8_t> body;
};

void send_message(Transport& transport, MessageType type, std::span<const uint8_t> body);
/// Empty on clean end-of-stream before a header; throws DecodeError on a
/// corrupt or truncated frame.
std::optional<WireMessage> recv_message(Transport& transport);

/// Lossless in-memory transport (two of these, cross-wired, form a duplex
/// in-process connection for the deterministic batch mode).
class MemPipe {
public:
    void write(std::span<const uint8_t> data);
    size_t read_some(uint8_t* buf, size_t max);  // blocks until data or writer close
    void close_write();

private:
    std::vector<uint8_t> buf_;
    size_t read_pos_ = 0;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable data_available_;
};

class MemTransport : public Transport {
public:
    MemTransport(MemPipe* out, MemPipe* in) : out_(out), in_(in) {}
    void send(std::span<const uint8_t> data) override { out_->write(data); }
    size_t recv_some(uint8_t* buf, size_t max) override { return in_->read_some(buf, max); }
    void close_send() override { out_->close_write(); }

private:
    MemPipe* out_;
    MemPipe* in_;
};

// ---------------------------------------------------------------------------
// Message payloads
// ---------------------------------------------------------------------------

/// One uncompressed RGB-D frame with its local pose; the unit stored in the
/// client/server pooled queues.
struct FrameMessage {
    uint64_t frame_index = 0;
    RigidTransform local_pose;  // camera-to-scene
    DepthImage depth;
    ColorImage color;
};

/// Body of a kFrame message: index, pose, then PNG depth and JPEG colour
/// payloads with their byte lengths.
std::vector<uint8_t> encode_frame(const FrameMessage& frame, int jpeg_quality = 90);
FrameMessage decode_frame(std::span<const uint8_t> body);

struct HelloMessage {
    CameraIntrinsics depth_intrinsics;
    CameraIntrinsics color_intrinsics;
};

std::vector<uint8_t> encode_hello(const HelloMessage& hello);
HelloMessage decode_hello(std::span<const uint8_t> body);

std::vector<uint8_t> encode_render_request(const RigidTransform& pose);
RigidTransform decode_render_request(std::span<const uint8_t> body);

struct RenderedImageMessage {
    int width = 0, height = 0;
    std::vector<uint8_t> jpeg;
};

std::vector<uint8_t> encode_rendered_image(const ColorImage& image, int jpeg_quality = 90);
RenderedImageMessage decode_rendered_image(std::span<const uint8_t> body);

}  // namespace collab
