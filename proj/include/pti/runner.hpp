#pragma once

#include <exception>
#include <thread>
#include <utility>

#include "pti/error.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

/// Runs both parties in-process over a pipe, the server on its own thread.
/// If either side throws, both channels are closed so the peer unblocks, and
/// the original (non-transport) error is rethrown.
template <typename ClientFn, typename ServerFn>
auto run_two_party(const SessionOptions& opts, ClientFn&& client, ServerFn&& server) {
  auto [c0, c1] = make_pipe();
  Session s0(0, std::move(c0), opts);
  Session s1(1, std::move(c1), opts);

  using ServerResult = decltype(server(s1));
  ServerResult server_result{};
  std::exception_ptr server_error;
  std::thread t([&] {
    try {
      server_result = server(s1);
    } catch (...) {
      server_error = std::current_exception();
      s1.close();
    }
  });

  using ClientResult = decltype(client(s0));
  ClientResult client_result{};
  std::exception_ptr client_error;
  try {
    client_result = client(s0);
  } catch (...) {
    client_error = std::current_exception();
    s0.close();
  }
  t.join();

  auto is_transport = [](const std::exception_ptr& e) {
    try {
      std::rethrow_exception(e);
    } catch (const TransportError&) {
      return true;
    } catch (...) {
      return false;
    }
  };
  if (client_error && server_error) {
    std::rethrow_exception(is_transport(client_error) ? server_error : client_error);
  }
  if (client_error) std::rethrow_exception(client_error);
  if (server_error) std::rethrow_exception(server_error);
  return std::make_pair(std::move(client_result), std::move(server_result));
}

}  // namespace pti::mpc
