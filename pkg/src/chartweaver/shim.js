"use strict";
(() => {
  // src/shim.ts
  var LEVELS = {
    error: "error",
    warn: "warning",
    info: "info",
    log: "info",
    debug: "info"
  };
  function formatArg(value) {
    if (typeof value === "string") {
      return value;
    }
    try {
      const text = JSON.stringify(value);
      return text === void 0 ? String(value) : text;
    } catch {
      return String(value);
    }
  }
  function installReadinessShim(win) {
    const existing = win.__cw_ready__;
    if (existing) {
      return existing;
    }
    const state = {
      load_fired: false,
      fonts_ready: false,
      stable_frames: 0,
      has_vector_root: false
    };
    const entries = [];
    for (const method of Object.keys(LEVELS)) {
      const original = win.console[method];
      const native = typeof original === "function" ? original.bind(win.console) : null;
      win.console[method] = (...args) => {
        try {
          entries.push({ level: LEVELS[method], text: args.map(formatArg).join(" ") });
        } catch {
        }
        if (native) {
          native(...args);
        }
      };
    }
    win.addEventListener("error", (event) => {
      entries.push({
        level: "error",
        text: String(event.message ?? event.error ?? "uncaught error")
      });
    });
    win.addEventListener("load", () => {
      state.load_fired = true;
    });
    const fontsReady = win.document.fonts?.ready;
    if (fontsReady && typeof fontsReady.then === "function") {
      fontsReady.then(() => {
        state.fonts_ready = true;
      });
    } else {
      state.fonts_ready = true;
    }
    let lastHeight = -1;
    const observe = () => {
      const root = win.document.documentElement;
      const height = root ? root.scrollHeight : 0;
      if (height === lastHeight) {
        state.stable_frames += 1;
      } else {
        state.stable_frames = 0;
        lastHeight = height;
      }
      state.has_vector_root = win.document.querySelector("svg") !== null;
      win.requestAnimationFrame(observe);
    };
    win.requestAnimationFrame(observe);
    const handle = {
      entries,
      snapshot() {
        return {
          load_fired: state.load_fired,
          fonts_ready: state.fonts_ready,
          stable_frames: state.stable_frames,
          has_vector_root: state.has_vector_root,
          console_entries: entries.length
        };
      }
    };
    win.__cw_ready__ = handle;
    return handle;
  }

  // src/entry.ts
  installReadinessShim(window);
})();
