/** Browser entry point. The page can point at a service on another
 * origin with ?service=http://host:port (the service must allow that
 * origin via its cors_origins setting); otherwise same-origin is used.
 */

import { ApiClient } from "./api.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("the page is missing its #app element");
}

createApp(root, {
  client: new ApiClient(baseUrl),
  storage: window.localStorage,
});
