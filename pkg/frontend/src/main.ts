/** Entry point: read service location from the query string and mount.
 *
 *   index.html?base=http://127.0.0.1:8000&session=my-session
 */

import { ApiClient } from "./api.js";
import { AnnotationStore } from "./state.js";
import { mount } from "./view.js";

export function boot(root: HTMLElement, location: Location): AnnotationStore {
  const params = new URLSearchParams(location.search);
  const base = params.get("base") ?? "http://127.0.0.1:8000";
  const session = params.get("session") ?? "default";
  const store = new AnnotationStore(new ApiClient(base, session));
  mount(root, store);
  void store.loadNext();
  return store;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document.getElementById("app")!, window.location);
}
