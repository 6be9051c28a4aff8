import { ApiClient } from "./api.js";
import { startApp } from "./app.js";
import { Store } from "./state.js";

const root = document.getElementById("app");
if (root) {
    startApp(root, new ApiClient(""), new Store());
}
