// Keyboard shortcuts for rapid annotation; returns an unbind function.

export type KeyBindings = Record<string, () => void>;

export function bindHotkeys(
  bindings: KeyBindings,
  target: Pick<Window, "addEventListener" | "removeEventListener"> = window,
): () => void {
  const handler = (event: Event) => {
    const key = (event as KeyboardEvent).key?.toLowerCase();
    const action = key ? bindings[key] : undefined;
    if (action) {
      event.preventDefault();
      action();
    }
  };
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
