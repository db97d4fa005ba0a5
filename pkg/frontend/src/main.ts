import { mountApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const base = (window as unknown as { CAUSERANK_API?: string }).CAUSERANK_API ?? "";
  mountApp(root, base);
}
