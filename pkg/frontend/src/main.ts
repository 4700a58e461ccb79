import { boot } from "./app";
import "./style.css";

const root = document.getElementById("app");
if (root) {
  boot(root).catch((err) => {
    root.textContent = `failed to start profiler: ${err instanceof Error ? err.message : err}`;
  });
}
