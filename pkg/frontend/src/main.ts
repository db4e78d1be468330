import { ChatClient } from "./api.js";
import { resolveServiceUrl } from "./config.js";
import { ChatStore } from "./state.js";
import { renderApp } from "./ui.js";

const serviceUrl = resolveServiceUrl();
const client = new ChatClient(serviceUrl);
const store = new ChatStore(client);

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app container");
}
renderApp(root, store);

client
  .health()
  .then((health) => {
    console.info(`dsqa service at ${serviceUrl}:`, health.status);
  })
  .catch(() => {
    console.warn(`dsqa service not reachable at ${serviceUrl}`);
  });
