import { ApiClient } from "./api.js";
import { ConsoleApp } from "./app.js";

const base =
  new URLSearchParams(window.location.search).get("service") ??
  "http://127.0.0.1:8000";

new ConsoleApp(document.getElementById("app")!, new ApiClient(base));
