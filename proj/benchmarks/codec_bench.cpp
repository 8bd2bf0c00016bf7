#include <benchmark/benchmark.h>

#include "tunnelguard/device/command.hpp"
#include "tunnelguard/device/room.hpp"
#include "tunnelguard/server/telemetry.hpp"
#include "tunnelguard/tunnel/control.hpp"
#include "tunnelguard/tunnel/envelope.hpp"
#include "tunnelguard/tunnel/frame.hpp"

using namespace tg;

namespace {

tunnel::Frame data_frame(std::size_t payload) {
  tunnel::Frame f{tunnel::FrameKind::Data, true, 7, 42, 0, 0, {}};
  f.payload.assign(payload, 0x5a);
  return f;
}

void BM_FrameEncode(benchmark::State& state) {
  auto f = data_frame(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tunnel::encode_frame(f));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrameEncode)->Arg(64)->Arg(1024);

void BM_FrameDecode(benchmark::State& state) {
  auto wire = tunnel::encode_frame(data_frame(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(tunnel::decode_frame(wire));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FrameDecode)->Arg(64)->Arg(1024);

void BM_ControlRoundTrip(benchmark::State& state) {
  tunnel::ControlMessage m{tunnel::MessageType::ICRQ, {}};
  m.add(14, Bytes{0, 0, 0, 42});
  m.add(15, Bytes(8, 1));
  for (auto _ : state) benchmark::DoNotOptimize(tunnel::decode_control(tunnel::encode_control(m)));
}
BENCHMARK(BM_ControlRoundTrip);

struct Pair {
  tunnel::SessionKeys keys;
  tunnel::SessionState lac, lns;
  tunnel::Frame hdr{tunnel::FrameKind::Data, true, 9, 77, 0, 0, {}};

  Pair()
      : keys(tunnel::derive_session_keys(tunnel::SecretKey(Bytes(32, 3)), 9, 77, {}, {})),
        lac(tunnel::make_session(77, keys, true)),
        lns(tunnel::make_session(77, keys, false)) {
    lac.state = lns.state = tunnel::SessionPhase::Established;
  }
};

void BM_Seal(benchmark::State& state) {
  Pair p;
  Bytes pt(static_cast<std::size_t>(state.range(0)), 0x11);
  auto aad = tunnel::frame_header(p.hdr, pt.size() + tunnel::kEnvelopeOverhead);
  for (auto _ : state) benchmark::DoNotOptimize(tunnel::seal_payload(p.lac, pt, aad));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Seal)->Arg(40)->Arg(1024);

void BM_Open(benchmark::State& state) {
  Pair p;
  Bytes pt(static_cast<std::size_t>(state.range(0)), 0x11);
  auto aad = tunnel::frame_header(p.hdr, pt.size() + tunnel::kEnvelopeOverhead);
  auto sealed = tunnel::seal_payload(p.lac, pt, aad);
  for (auto _ : state) {
    auto fresh = p.lns;  // replay window would reject the second open
    benchmark::DoNotOptimize(tunnel::open_payload(fresh, sealed, aad));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Open)->Arg(40)->Arg(1024);

void BM_TelemetryLine(benchmark::State& state) {
  device::RoomState st;
  st.room_id = 102;
  st.motion = true;
  st.temperature = 231;
  st.humidity = 44;
  for (auto _ : state) benchmark::DoNotOptimize(server::parse_log_line(device::format_telemetry(st)));
}
BENCHMARK(BM_TelemetryLine);

void BM_CommandRoundTrip(benchmark::State& state) {
  device::Command c{static_cast<std::uint8_t>(device::Opcode::Lock), 1234};
  for (auto _ : state) benchmark::DoNotOptimize(device::decode_command(device::encode_command(c)));
}
BENCHMARK(BM_CommandRoundTrip);

}  // namespace
