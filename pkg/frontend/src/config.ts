/** Service URL resolution: ?service= query parameter wins, then the
 * build-time meta tag, then the development default. */

const DEFAULT_SERVICE_URL = "http://localhost:8000";

export function resolveServiceUrl(
  search: string = window.location.search,
  doc: Document = document,
): string {
  const fromQuery = new URLSearchParams(search).get("service");
  if (fromQuery) {
    return fromQuery.replace(/\/+$/, "");
  }
  const meta = doc.querySelector('meta[name="dsqa-service"]');
  const fromMeta = meta?.getAttribute("content");
  if (fromMeta && fromMeta !== "__DSQA_SERVICE_URL__") {
    return fromMeta.replace(/\/+$/, "");
  }
  return DEFAULT_SERVICE_URL;
}
