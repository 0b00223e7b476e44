import { ApiClient } from "./api.js";
import { AnnotationApp } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
new AnnotationApp(root, new ApiClient("")).start();
