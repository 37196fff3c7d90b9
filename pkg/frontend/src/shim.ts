/**
 * Readiness and console-mirroring shim injected into every rendered chart
 * page. It publishes the well-known `__cw_ready__` marker object that the
 * render harness polls over the debugging protocol.
 *
 * The envelope reports: whether the load event fired, whether fonts are
 * loaded, how many consecutive animation frames saw an unchanged document
 * height (reset by any change), and whether a vector-graphics root exists.
 * Console methods are wrapped so entries are mirrored into the envelope
 * without altering native behavior; a wrapped call still reaches the
 * original console with the original arguments.
 */

export type ConsoleLevel = 'error' | 'warning' | 'info';

export interface MirroredEntry {
  level: ConsoleLevel;
  text: string;
}

export interface ReadinessEnvelope {
  load_fired: boolean;
  fonts_ready: boolean;
  stable_frames: number;
  has_vector_root: boolean;
  console_entries: number;
}

export interface ReadinessHandle {
  entries: MirroredEntry[];
  snapshot(): ReadinessEnvelope;
}

type ConsoleMethod = 'log' | 'info' | 'warn' | 'error' | 'debug';

const LEVELS: Record<ConsoleMethod, ConsoleLevel> = {
  error: 'error',
  warn: 'warning',
  info: 'info',
  log: 'info',
  debug: 'info'
};

interface ErrorLikeEvent {
  message?: unknown;
  error?: unknown;
}

export interface MinimalDocument {
  documentElement: { scrollHeight: number } | null;
  querySelector(selector: string): unknown;
  fonts?: { ready?: Promise<unknown> };
}

export interface ShimWindow {
  __cw_ready__?: ReadinessHandle;
  console: { [K in ConsoleMethod]?: (...args: unknown[]) => void };
  document: MinimalDocument;
  addEventListener(type: 'load' | 'error', listener: (event: ErrorLikeEvent) => void): void;
  requestAnimationFrame(callback: () => void): unknown;
}

function formatArg(value: unknown): string {
  if (typeof value === 'string') {
    return value;
  }
  try {
    const text = JSON.stringify(value);
    return text === undefined ? String(value) : text;
  } catch {
    return String(value);
  }
}

const STABLE_FRAMES_READY = 2;

export function installReadinessShim(win: ShimWindow): ReadinessHandle {
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
  const entries: MirroredEntry[] = [];

  for (const method of Object.keys(LEVELS) as ConsoleMethod[]) {
    const original = win.console[method];
    const native = typeof original === 'function' ? original.bind(win.console) : null;
    win.console[method] = (...args: unknown[]) => {
      try {
        entries.push({ level: LEVELS[method], text: args.map(formatArg).join(' ') });
      } catch {
        // mirroring must never interfere with the page
      }
      if (native) {
        native(...args);
      }
    };
  }

  win.addEventListener('error', (event) => {
    entries.push({
      level: 'error',
      text: String(event.message ?? event.error ?? 'uncaught error')
    });
  });

  win.addEventListener('load', () => {
    state.load_fired = true;
  });

  const fontsReady = win.document.fonts?.ready;
  if (fontsReady && typeof fontsReady.then === 'function') {
    fontsReady.then(() => {
      state.fonts_ready = true;
    });
  } else {
    state.fonts_ready = true;
  }

  let lastHeight = -1;
  const observe = (): void => {
    const root = win.document.documentElement;
    const height = root ? root.scrollHeight : 0;
    if (height === lastHeight) {
      state.stable_frames += 1;
    } else {
      state.stable_frames = 0;
      lastHeight = height;
    }
    state.has_vector_root = win.document.querySelector('svg') !== null;
    win.requestAnimationFrame(observe);
  };
  win.requestAnimationFrame(observe);

  const handle: ReadinessHandle = {
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

/** The harness treats a page as ready only under this exact condition. */
export function isReady(envelope: ReadinessEnvelope): boolean {
  return (
    envelope.load_fired &&
    envelope.fonts_ready &&
    envelope.stable_frames >= STABLE_FRAMES_READY
  );
}
