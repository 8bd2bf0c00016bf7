#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "tunnelguard/tunnel/endpoint.hpp"

namespace tg::tunnel {

struct PeerAddress {
  std::uint32_t node = 0;
  std::uint16_t port = 0;

  friend auto operator<=>(const PeerAddress&, const PeerAddress&) = default;
};

struct ListenerConfig {
  ProtocolVariant variant = ProtocolVariant::L2tpLite;
  SecretKey shared_secret;
  std::uint16_t mtu = kDefaultMtu;
  TimerPolicy timers;
  std::optional<std::uint64_t> nonce_seed;
  std::size_t max_tunnels = 64;
};

struct ServerOutput {
  std::uint32_t tunnel_id = 0;
  PeerAddress peer;
  Output output;
};
using ServerOutputs = std::vector<ServerOutput>;

// The LNS side: accepts new tunnels from any LAC and demultiplexes traffic to
// per-tunnel endpoints. L2TP-lite demuxes on the header tunnel id; PPTP-lite
// on the stream peer (control) and the sending node (GRE data).
class TunnelServer {
 public:
  explicit TunnelServer(ListenerConfig config);

  ServerOutputs on_datagram(VirtualTime now, PeerAddress from, ByteView bytes);
  ServerOutputs on_stream(VirtualTime now, PeerAddress from, ByteView chunk);
  ServerOutputs on_stream_reset(VirtualTime now, PeerAddress from);
  ServerOutputs step(VirtualTime now);

  // Routes by session id across all tunnels. Throws TunnelError(NoSuchSession).
  ServerOutputs send_payload(VirtualTime now, std::uint32_t session_id, ByteView payload);
  ServerOutputs open_session(VirtualTime now, std::uint32_t tunnel_id, std::uint32_t session_id);
  ServerOutputs close_session(VirtualTime now, std::uint32_t session_id);
  ServerOutputs close_tunnel(VirtualTime now, std::uint32_t tunnel_id);

  std::optional<VirtualTime> next_deadline() const;

  const TunnelEndpoint* tunnel(std::uint32_t tunnel_id) const;
  std::optional<std::uint32_t> tunnel_for_session(std::uint32_t session_id) const;
  std::vector<std::uint32_t> tunnel_ids() const;
  ProtocolVariant variant() const noexcept { return config_.variant; }
  std::uint64_t unroutable() const noexcept { return unroutable_; }

 private:
  struct Tunnel {
    PeerAddress peer;
    std::unique_ptr<TunnelEndpoint> endpoint;
  };

  Tunnel* accept(std::uint32_t tunnel_id, PeerAddress peer);
  ServerOutputs wrap(std::uint32_t tunnel_id, const PeerAddress& peer, Outputs outputs) const;
  std::size_t live_tunnels() const;

  ListenerConfig config_;
  std::map<std::uint32_t, Tunnel> tunnels_;
  std::map<PeerAddress, std::uint32_t> stream_peers_;
  std::map<std::uint32_t, std::uint32_t> gre_peers_;  // node -> tunnel
  std::map<PeerAddress, StreamReassembler> pending_streams_;
  std::uint64_t unroutable_ = 0;
};

}  // namespace tg::tunnel
