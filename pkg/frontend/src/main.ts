import { Dashboard } from "./app.js";

// Browser entry point.  The service base URL can be set per-deployment via
// ?api=http://host:port; it defaults to a local service.
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://localhost:8000";

const root = document.getElementById("lmfx-root");
if (root) {
  const dashboard = new Dashboard(root, { baseUrl });
  void dashboard.start();
}
