#pragma once

#include "collab/wire.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace collab {

/// Thin RAII wrapper over a connected TCP socket, presented as a Transport.
class TcpSocket : public Transport {
public:
    explicit TcpSocket(int fd) : fd_(fd) {}
    TcpSocket(TcpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    ~TcpSocket() override;

    static TcpSocket connect_to(const std::string& host, uint16_t port);

    void send(std::span<const uint8_t> data) override;
    size_t recv_some(uint8_t* buf, size_t max) override;
    void close_send() override;

    int fd() const { return fd_; }

private:
    int fd_ = -1;
};

class TcpListener {
public:
    TcpListener(const std::string& host, uint16_t port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;

    /// Blocks; empty pointer after close() from another thread.
    std::unique_ptr<TcpSocket> accept_client();
    uint16_t port() const { return port_; }
    void close();

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

/// "host:port" -> (host, port); throws on malformed input.
std::pair<std::string, uint16_t> parse_address(const std::string& address);

}  // namespace collab
